"""Dense truncations P_lambda A P_lambda and what is computed from them."""

import json
import logging
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InvalidArgument, ResourceLimit, UnsupportedOperator

log = logging.getLogger(__name__)

DEFAULT_DENSE_CAP = 4096
HERMITIAN_RTOL = 1e-10
# exp(-36.85) < 1e-16
_HEAT_TAIL = 36.85


@dataclass
class TruncatedMatrix:
    cutoff: float
    entries: np.ndarray
    source: str = ""
    f_zero_ok: bool = True  # False once a function with f(0) != 0 was applied
    symmetrized: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def size(self):
        return self.entries.shape[0]

    def trace(self):
        return _kernels.compensated_sum(np.diagonal(self.entries).copy())


def truncate(model, A, lam, cap=DEFAULT_DENSE_CAP):
    """Dense ``P_lambda A P_lambda`` over the first ``N(lambda)`` modes."""
    n = model.counting(lam)
    if n > cap:
        raise ResourceLimit(f"N({lam}) = {n} exceeds the dense cap {cap}")
    return TruncatedMatrix(float(lam), A.dense(n), source=A.label)


def trace_mean(T):
    """``Tr(T) / size``."""
    if T.size == 0:
        raise InvalidArgument("empty truncation")
    return T.trace() / T.size


def _hermitian_part(T):
    a = T.entries
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    defect = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
    if defect > HERMITIAN_RTOL * max(scale, 1e-300):
        raise InvalidArgument(
            f"matrix is not hermitian (defect {defect:.3g} vs scale {scale:.3g})"
        )
    if defect > 0:
        log.info("symmetrizing %s (defect %.3g)", T.source, defect)
        return 0.5 * (a + a.conj().T), True
    return a, False


def eigh(T):
    """Eigenvalues (ascending) and eigenvectors of a hermitian truncation."""
    a, _ = _hermitian_part(T)
    return np.linalg.eigh(a)


def matrix_function(T, f):
    """``U f(Lambda) U*`` for hermitian ``T = U Lambda U*``.

    ``f`` must accept a float array.  The result records whether ``f(0) = 0``.
    """
    a, sym = _hermitian_part(T)
    w, U = np.linalg.eigh(a)
    fw = np.asarray(f(w))
    out = (U * fw[None, :]) @ U.conj().T
    f0 = complex(np.asarray(f(np.zeros(1)))[0])
    return TruncatedMatrix(
        T.cutoff,
        out,
        source=f"f({T.source})",
        f_zero_ok=T.f_zero_ok and abs(f0) == 0,
        symmetrized=sym or T.symmetrized,
        meta={"eigenvalues": w},
    )


def heat_cutoff(t, squared=True):
    """Eigenvalue beyond which the heat weight is below 1e-16."""
    if t <= 0:
        raise InvalidArgument("heat parameter must be positive")
    return math.sqrt(_HEAT_TAIL / t) if squared else _HEAT_TAIL / t


def heat_trace(model, A, t, squared=True):
    """``sum_k <e_k, A e_k> w(lambda_k)`` with ``w = exp(-t lambda^2)`` or ``exp(-t lambda)``."""
    cut = heat_cutoff(t, squared)
    if model.weyl_estimate(cut) > model.max_modes:
        raise ResourceLimit(f"heat tail cutoff {cut:.4g} exceeds the enumeration cap")
    n = model.counting(cut)
    lam = model.eigenvalues(n)
    w = np.exp(-t * lam * lam) if squared else np.exp(-t * lam)
    return _kernels.compensated_sum(A.diagonal(n) * w)


def time_average(model, A, T, lam, cap=DEFAULT_DENSE_CAP):
    """Exact truncated ``A_T = (1/T) int_0^T e^{it|D|} A e^{-it|D|} dt``."""
    if T <= 0:
        raise InvalidArgument("averaging time must be positive")
    M = truncate(model, A, lam, cap)
    ev = model.eigenvalues(M.size)
    kappa = _kernels.flow_kernel(ev[:, None] - ev[None, :], T)
    return TruncatedMatrix(M.cutoff, M.entries * kappa, source=f"avg[{T}]({A.label})")


def hs_norm_offdiag(model, B, lam, margin=None):
    """``||P_lambda B (1 - P_lambda)||_HS^2`` from the band of ``B``."""
    if B.band is None:
        raise UnsupportedOperator(f"operator {B.label} has no finite band")
    n = model.counting(lam)
    reach = model.counting(lam + B.band + 1e-9)
    if margin is not None:
        reach = min(reach, model.counting(lam + margin))
    if reach <= n:
        return 0.0
    block = B.matrix(n, reach)[:, n:]
    return float(np.sum(np.abs(block.data) ** 2))


def cross_term(model, A, B, lam):
    """``Tr(P A (1-P) B P)`` computed through the bands of ``A`` and ``B``."""
    if A.band is None or B.band is None:
        raise UnsupportedOperator("cross term needs banded operators")
    n = model.counting(lam)
    reach = model.counting(lam + max(A.band, B.band) + 1e-9)
    if reach <= n:
        return 0j
    a = A.matrix(n, reach)[:, n:]
    b = B.matrix(reach, n)[n:, :]
    return complex((a @ b).diagonal().sum())


# ---------------------------------------------------------------- dump format


def dump_matrix(T, path):
    """Write a 4-byte header length, a JSON header, then column-major complex128."""
    header = json.dumps(
        {"size": T.size, "cutoff": T.cutoff, "source": T.source, "dtype": "complex128",
         "order": "F"}
    ).encode()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.asarray(T.entries, dtype="<c16").tobytes(order="F"))


def load_matrix(path):
    with open(path, "rb") as fh:
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen))
        n = int(header["size"])
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != n * n:
        raise InvalidArgument("matrix dump is truncated")
    return TruncatedMatrix(
        float(header["cutoff"]), data.reshape((n, n), order="F").copy(), header.get("source", "")
    )
