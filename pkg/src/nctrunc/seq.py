"""Summability transforms on finite prefixes of sequences.

All transforms take a 1-d array ``x`` holding ``x_0 .. x_n`` and return the
transformed prefix of the same length.  Sums run left to right with
compensation so results do not depend on caller parallelism.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InvalidArgument

DEFAULT_MEASURABLE_TOL = 1e-2
DEFAULT_WINDOW = 0.75


def as_sequence(x):
    """Validate a sequence prefix: non-empty, 1-d, all entries finite."""
    arr = np.asarray(x)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidArgument("sequence must be a non-empty 1-d array")
    if not np.iscomplexobj(arr):
        arr = arr.astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument("sequence contains NaN or Inf")
    return arr


def _indices(n):
    return np.arange(n, dtype=np.float64)


def cesaro(x):
    """Cesaro means ``(1/(n+1)) sum_{k<=n} x_k``."""
    x = as_sequence(x)
    # centring on x_0 keeps constants fixed bit for bit
    x0 = x[0]
    return x0 + _kernels.compensated_cumsum(x - x0) / (_indices(x.size) + 1.0)


def log_mean(x):
    """Logarithmic means ``(1/log(n+2)) sum_{k<=n} x_k/(k+1)``.

    This is the verbatim transform; note that it does not fix constants at
    finite n (``log_mean(ones)_n = H_{n+1}/log(n+2)``).
    """
    x = as_sequence(x)
    k = _indices(x.size)
    return _kernels.compensated_cumsum(x / (k + 1.0)) / np.log(k + 2.0)


def window_starts(size, window=None):
    """First index of the tail window used for each horizon n < size.

    ``window`` is an exponent ``a`` in [0, 1) dropping the first
    ``floor((n+1)^a) - 1`` terms, ``"sqrt"`` for ``a = 1/2``, or ``"none"``
    to keep the whole prefix.  The default is :data:`DEFAULT_WINDOW`.
    """
    n = np.arange(size, dtype=np.int64)
    window = DEFAULT_WINDOW if window is None else window
    if window == "none":
        return np.zeros(size, dtype=np.int64)
    if window == "sqrt":
        window = 0.5
    try:
        a = float(window)
    except (TypeError, ValueError):
        raise InvalidArgument(f"unknown window {window!r}") from None
    if not 0.0 <= a < 1.0:
        raise InvalidArgument("window exponent must lie in [0, 1)")
    # small guard so exact powers are not floored down by rounding
    return np.maximum(np.floor((n + 1.0) ** a + 1e-9).astype(np.int64) - 1, 0)


def _window_sum(prefix, starts):
    before = np.where(starts > 0, prefix[np.maximum(starts - 1, 0)], 0.0)
    return prefix - before


def log_mean_tail(x, window=None):
    """Normalised logarithmic mean over a tail window.

    Returns ``sum_{s_n<=k<=n} x_k/(k+1) / sum_{s_n<=k<=n} 1/(k+1)``.  It
    differs from :func:`log_mean` by a null sequence for bounded ``x``, so
    every extended limit agrees on both, but it maps constants to themselves
    exactly and discards the slowly-forgotten head of the sequence.
    """
    x = as_sequence(x)
    k = _indices(x.size)
    w = 1.0 / (k + 1.0)
    starts = window_starts(x.size, window)
    x0 = x[0]
    num = _window_sum(_kernels.compensated_cumsum((x - x0) * w), starts)
    den = _window_sum(_kernels.compensated_cumsum(w), starts)
    return x0 + num / den


def shift_right(x):
    """Right shift ``(x_0, x_1, ..) -> (0, x_0, x_1, ..)``, same length."""
    x = as_sequence(x)
    out = np.zeros_like(x)
    out[1:] = x[:-1]
    return out


def abel_mean(x, r):
    """Abel mean ``(1 - r) sum_k r^k x_k`` of the available prefix."""
    x = as_sequence(x)
    if not 0.0 <= r < 1.0:
        raise InvalidArgument("Abel parameter must lie in [0, 1)")
    weights = (1.0 - r) * r ** _indices(x.size)
    return _kernels.compensated_sum(weights * x)


def log_cesaro_gap(x, n):
    """``|M(x)_n - M(C(x))_n|``; tends to zero for bounded x."""
    x = as_sequence(x)
    if not 0 <= n < x.size:
        raise InvalidArgument(f"index {n} outside prefix of length {x.size}")
    head = x[: n + 1]
    return float(abs(log_mean(head)[n] - log_mean(cesaro(head))[n]))


def top_half(count):
    """Slice selecting the top half of a ladder of ``count`` points.

    Two-point ladders keep both points so drift is never trivially zero.
    """
    return slice((count - 1) // 2, count)


def spread(values):
    """Largest pairwise distance among ``values``."""
    v = np.asarray(values)
    if v.size < 2:
        return 0.0
    return float(np.max(np.abs(v[:, None] - v[None, :])))


@dataclass(frozen=True)
class LimitSurrogate:
    """Finite stand-in for an extended limit evaluated along a ladder."""

    ladder: tuple
    values: tuple
    value: complex
    drift: float
    measurable: bool
    tolerance: float = DEFAULT_MEASURABLE_TOL

    @property
    def real(self):
        return float(np.real(self.value))


def surrogate_from_values(ladder, values, tol=DEFAULT_MEASURABLE_TOL):
    """Build a :class:`LimitSurrogate` from values already computed at ``ladder``."""
    ladder = tuple(ladder)
    values = np.asarray(values)
    if len(ladder) == 0:
        raise InvalidArgument("ladder is empty")
    if len(ladder) != values.size:
        raise InvalidArgument("ladder and values differ in length")
    drift = spread(values[top_half(len(ladder))])
    value = values[-1]
    value = complex(value) if np.iscomplexobj(values) else float(value)
    return LimitSurrogate(
        ladder=ladder,
        values=tuple(values.tolist()),
        value=value,
        drift=drift,
        measurable=bool(drift < tol),
        tolerance=tol,
    )


def omega_surrogate(x, ladder, tol=DEFAULT_MEASURABLE_TOL):
    """Evaluate ``x`` on an increasing ladder of horizons.

    The value is ``x`` at the largest horizon; the drift is the spread over
    the top half of the ladder.  ``measurable`` is set when drift < ``tol``.
    """
    x = as_sequence(x)
    ladder = [int(n) for n in ladder]
    if not ladder:
        raise InvalidArgument("ladder is empty")
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise InvalidArgument("ladder must be strictly increasing")
    if ladder[0] < 0 or ladder[-1] >= x.size:
        raise InvalidArgument(
            f"ladder exceeds the computed horizon {x.size - 1}"
        )
    return surrogate_from_values(ladder, x[ladder], tol)


@dataclass(frozen=True)
class Resampling:
    """Weighted partial sums along all n and along checkpoints."""

    direct: np.ndarray
    resampled: np.ndarray
    difference: float
    ratio_defect: float
    block_defect: float
    hypotheses_hold: bool


def resample_on_checkpoints(a, phi, checkpoints, tol=0.05):
    """Compare ``(1/phi(n)) sum_{k<=n} a_k`` with its checkpoint subsequence.

    ``phi`` is a vectorised callable (or an array of values) that is
    positive and nondecreasing.  For every ``n`` up to the last checkpoint
    the second sequence is evaluated at ``k_{i_n} = min{k_i >= n}``.  The
    difference is the sup over the top half of ``n``; the two hypotheses
    (``phi(k_i)/phi(k_{i-1})`` near one, block sums of ``|a|`` over
    ``(k_{i-1}, k_i]`` divided by ``phi(k_i)`` small) are measured on the
    blocks serving that half, so that
    ``difference <= block_defect + ratio_defect * max|direct|``.
    """
    a = as_sequence(a)
    ks = np.asarray(checkpoints, dtype=np.int64)
    if ks.ndim != 1 or ks.size == 0:
        raise InvalidArgument("checkpoints must be a non-empty 1-d list")
    if np.any(np.diff(ks) <= 0):
        raise InvalidArgument("checkpoints must be strictly increasing")
    if ks[0] < 0 or ks[-1] >= a.size:
        raise InvalidArgument("checkpoints exceed the sequence prefix")
    last = int(ks[-1])
    n = np.arange(last + 1)
    phis = np.asarray(phi(n.astype(np.float64)) if callable(phi) else phi,
                      dtype=np.float64)[: last + 1]
    if phis.size != last + 1 or np.any(phis <= 0) or np.any(np.diff(phis) < 0):
        raise InvalidArgument("phi must be positive and nondecreasing")

    partial = _kernels.compensated_cumsum(a[: last + 1])
    direct = partial / phis
    target = ks[np.searchsorted(ks, n, side="left")]
    resampled = partial[target] / phis[target]

    half = top_half(last + 1)
    difference = float(np.max(np.abs(direct[half] - resampled[half])))

    # blocks (k_{i-1}, k_i] that serve some n in the top half
    used = np.flatnonzero(ks >= half.start)
    prev = np.where(used > 0, ks[np.maximum(used - 1, 0)], -1)
    right = ks[used]
    ratio_defect = float(np.max(phis[right] / phis[np.maximum(prev, 0)] - 1.0))
    abs_partial = _kernels.compensated_cumsum(np.abs(a[: last + 1]))
    before = np.where(prev >= 0, abs_partial[np.maximum(prev, 0)], 0.0)
    block_defect = float(np.max((abs_partial[right] - before) / phis[right]))
    return Resampling(
        direct=direct,
        resampled=resampled,
        difference=difference,
        ratio_defect=ratio_defect,
        block_defect=block_defect,
        hypotheses_hold=bool(ratio_defect < tol and block_defect < tol),
    )
