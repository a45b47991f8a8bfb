"""Szego limits, Widom cross terms, quantum-ergodicity statistics."""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, seq
from .errors import InvalidArgument, UnsupportedOperator
from .integrals import (
    EstimateReport,
    _check_ladder,
    _jsonable,
    _report,
    default_lambda_ladder,
    heat_integral,
    log_mean_diagonal,
    truncated_integral,
    weyl_fit,
)
from .models import commutator_norm_check
from .oracles import Identity, MatrixOracle
from .trunc import DEFAULT_DENSE_CAP, cross_term, truncate

QE_DECAY_FACTOR = 4.0
QE_DECAY_SPAN = 16.0
QE_STABLE_RTOL = 0.2
QE_LEVEL_TOL = 1e-10


# ---------------------------------------------------------------- Widom


def widom_ratio(model, A, B, ladder, check_cap=1024, tol=seq.DEFAULT_MEASURABLE_TOL):
    """``Tr(P A (1-P) B P) / Tr(P)`` along a cutoff ladder.

    Commutator norms ``||P [|D|, X] P||`` are recorded for the ladder points
    small enough to materialise densely (at most ``check_cap`` modes).
    """
    if A.band is None or B.band is None:
        raise UnsupportedOperator("Widom ratio needs banded operators")
    ladder = _check_ladder(ladder, "lambda ladder")
    counts = [model.counting(lam) for lam in ladder]
    values = [cross_term(model, A, B, lam) / n for lam, n in zip(ladder, counts)]
    small = [lam for lam, n in zip(ladder, counts) if n <= check_cap]
    comm = {
        "A": [commutator_norm_check(model, A, lam) for lam in small],
        "B": [commutator_norm_check(model, B, lam) for lam in small],
    }
    ratios = [
        abs(values[i + 1]) / abs(values[i]) if abs(values[i]) > 0 else float("nan")
        for i in range(len(values) - 1)
    ]
    extras = {"counts": counts, "commutator_ladder": small, "commutator_norms": comm,
              "step_ratios": ratios}
    rep = _report("widom_ratio", model, A, ladder, values, tol, extras)
    rep.expression = f"{A.label} | {B.label}"
    return rep


# ---------------------------------------------------------------- Szego


def _poly_value(coeffs, x):
    out = np.zeros_like(np.asarray(x, dtype=np.complex128))
    for c in reversed(coeffs):
        out = out * x + c
    return out


def polynomial_of(A, coeffs):
    """Oracle for ``sum_p c_p A^p``."""
    terms = [(complex(c), A.power(p)) for p, c in enumerate(coeffs) if c != 0]
    if not terms:
        return 0.0 * Identity(A.model)
    out = terms[0][0] * terms[0][1]
    for c, X in terms[1:]:
        out = out + c * X
    out.label = f"f({A.label}), f coefficients {[_short(c) for c in coeffs]}"
    return out


def _short(c):
    c = complex(c)
    return c.real if c.imag == 0 else c


def szego_functional(model, A, f, ladder, horizons=None, cap=DEFAULT_DENSE_CAP,
                     tol=seq.DEFAULT_MEASURABLE_TOL, method="eig"):
    """Left side ``Tr f(P A P) / Tr P`` and right side ``int f(A)``.

    ``f`` is a list of polynomial coefficients ``c_0, c_1, ...`` or a
    vectorised callable.  Polynomials give an exact right side through the
    operator algebra; for callables the right side is the log mean of the
    diagonal of ``f`` applied to the largest truncation and is flagged
    ``approximate-rhs``.

    ``method="power"`` (polynomial ``f`` only) evaluates the left side as
    ``sum_p c_p Tr((P A P)^p)`` with sparse products, so it is not bound by
    the dense cap.
    """
    if method not in ("eig", "power"):
        raise InvalidArgument(f"unknown Szego method {method!r}")
    if not A.hermitian:
        raise InvalidArgument("Szego functional needs a hermitian operator")
    ladder = _check_ladder(ladder, "lambda ladder")
    if callable(f):
        fn = f
        f0 = complex(np.asarray(f(np.zeros(1)))[0])
        coeffs = None
    else:
        coeffs = [complex(c) for c in f]
        fn = lambda x: _poly_value(coeffs, x)  # noqa: E731
        f0 = coeffs[0] if coeffs else 0
    if abs(f0) != 0:
        raise InvalidArgument("Szego functional requires f(0) = 0")

    if method == "power" and coeffs is None:
        raise InvalidArgument("method 'power' needs polynomial coefficients")

    lhs_vals, largest = [], None
    for lam in ladder:
        if method == "power":
            lhs_vals.append(_power_trace(model, A, coeffs, lam))
            continue
        T = truncate(model, A, lam, cap)
        w, U = _eig(T.entries, need_vectors=(coeffs is None and lam == ladder[-1]))
        lhs_vals.append(_kernels.compensated_sum(np.asarray(fn(w), dtype=np.complex128))
                        / T.size)
        if U is not None:
            largest = (w, U)
    lhs = _report("szego_lhs", model, A, ladder, lhs_vals, tol,
                  {"counts": [model.counting(lam) for lam in ladder]})

    if coeffs is not None:
        fA = polynomial_of(A, coeffs)
        rhs = log_mean_diagonal(model, fA, horizons, tol=tol)
        rhs.estimator = "szego_rhs"
        rhs.extras["approximate_rhs"] = False
    else:
        w, U = largest
        diag = np.einsum("ij,j,ij->i", U, np.asarray(fn(w), dtype=np.complex128), U.conj())
        n = diag.size
        hz = [h for h in (horizons or (n // 100, n // 10, n - 1)) if 0 < h < n]
        x = seq.log_mean_tail(diag)
        rhs = _report("szego_rhs", model, A, hz, [x[h] for h in hz], tol,
                      {"approximate_rhs": True})
        rhs.extras["flag"] = "approximate-rhs"
    return lhs, rhs


def _power_trace(model, A, coeffs, lam):
    n = model.counting(lam)
    if n == 0:
        raise InvalidArgument(f"no modes below cutoff {lam}")
    M = A.matrix(n, n)
    total = coeffs[0] * n
    X = None
    for c in coeffs[1:]:
        X = M if X is None else X @ M
        if c != 0:
            total += c * X.diagonal().sum()
    return complex(total) / n


def _eig(a, need_vectors=False):
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if float(np.max(np.abs(a - a.conj().T), initial=0.0)) > 1e-10 * max(scale, 1e-300):
        raise InvalidArgument("truncation is not hermitian")
    a = 0.5 * (a + a.conj().T)
    if need_vectors:
        return np.linalg.eigh(a)
    return np.linalg.eigvalsh(a), None


# ---------------------------------------------------------------- density one


@dataclass
class DensityOne:
    indices: np.ndarray  # the extracted set J
    density: np.ndarray  # #(J cap [0, n]) / (n + 1)
    stages: list  # (m, eps_m, N_m)
    tail_sup: list  # sup_{j in J, j >= N_m} |x_j - c| per stage
    verdict: str

    @property
    def final_density(self):
        return float(self.density[-1])


def default_schedule(levels=12):
    return [2.0 ** (-m) for m in range(1, levels + 1)]


def extract_density_one(x, c, schedule=None):
    """Greedy density-one extraction along a tolerance schedule.

    Stage ``m`` (1-based) keeps indices with ``|x_k - c| < eps_m`` from the
    horizon ``N_m`` past which those indices have running density at least
    ``1 - 2^-m``; stage 1 also covers indices before ``N_1``.  The last
    reached stage runs to the end of the prefix.
    """
    x = seq.as_sequence(x)
    eps = [float(e) for e in (schedule or default_schedule())]
    if not eps or any(e <= 0 for e in eps) or any(b > a for a, b in zip(eps, eps[1:])):
        raise InvalidArgument("tolerance schedule must be positive and nonincreasing")
    n = x.size
    dev = np.abs(x - c)
    ranks = np.arange(1, n + 1, dtype=np.float64)

    stages = []
    prev = 0
    for m, e in enumerate(eps, start=1):
        good = dev < e
        running = np.cumsum(good) / ranks
        bad = np.flatnonzero(running < 1.0 - 2.0 ** (-m))
        start = 0 if bad.size == 0 else int(bad[-1]) + 1
        if start >= n:
            break
        start = max(start, prev)
        stages.append((m, e, start))
        prev = start

    member = dev < eps[0]
    for i, (m, e, start) in enumerate(stages):
        stop = stages[i + 1][2] if i + 1 < len(stages) else n
        member[start:stop] = dev[start:stop] < e
    indices = np.flatnonzero(member)
    density = np.cumsum(member) / ranks

    tail_sup = []
    for m, e, start in stages:
        tail = dev[indices[indices >= start]]
        tail_sup.append(float(tail.max()) if tail.size else 0.0)
    verdict = "density-one convergence" if len(stages) >= 2 else "no density-one convergence"
    return DensityOne(indices, density, stages, tail_sup, verdict)


# ---------------------------------------------------------------- QE statistics


@dataclass
class QEStatistics:
    target: complex
    ladder: tuple
    counts: tuple
    variance: tuple
    verdict: str
    diagonal: np.ndarray = field(repr=False)
    extraction: DensityOne = field(repr=False)
    target_source: str = "log_mean"

    def csv_rows(self):
        return [[repr(float(lam)), str(int(n)), repr(float(v))]
                for lam, n, v in zip(self.ladder, self.counts, self.variance)]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "N", "variance"])
        w.writerows(self.csv_rows())
        return buf.getvalue()

    def to_dict(self):
        return _jsonable({
            "target": self.target,
            "target_source": self.target_source,
            "ladder": self.ladder,
            "counts": self.counts,
            "variance": self.variance,
            "verdict": self.verdict,
            "density": self.extraction.final_density,
            "extraction_verdict": self.extraction.verdict,
        })

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def qe_target(model, A, source="log_mean"):
    """``tau(A)`` from a designated estimator, or a given number."""
    if isinstance(source, (int, float, complex)):
        return complex(source)
    if source == "log_mean":
        return log_mean_diagonal(model, A).value
    if source == "truncated":
        return truncated_integral(model, A).value
    if source == "heat":
        return heat_integral(model, A).value
    raise InvalidArgument(f"unknown target source {source!r}")


def qe_verdict(ladder, variance, decay=QE_DECAY_FACTOR, span=QE_DECAY_SPAN,
               stable_rtol=QE_STABLE_RTOL, level_tol=QE_LEVEL_TOL):
    """"QE-consistent" when V drops by ``decay`` over a ``span``-fold range of
    lambda, "QE-violated" when the last two values agree within
    ``stable_rtol`` at a positive level, otherwise "inconclusive"."""
    v = np.asarray(variance, dtype=np.float64)
    lam = np.asarray(ladder, dtype=np.float64)
    if np.all(v <= level_tol):
        return "QE-consistent"
    wide = np.flatnonzero(lam[-1] / lam >= span)
    if wide.size and v[-1] * decay <= v[wide[-1]]:
        return "QE-consistent"
    if v.size >= 2 and v[-1] > level_tol and abs(v[-1] - v[-2]) <= stable_rtol * v[-1]:
        return "QE-violated"
    return "inconclusive"


def qe_statistics(model, A, ladder=None, tau_source="log_mean", schedule=None):
    """Variance ``V(lambda)`` of the diagonal around ``tau(A)`` and a verdict."""
    ladder = _check_ladder(ladder or default_lambda_ladder(model), "lambda ladder")
    tau = qe_target(model, A, tau_source)
    counts = [model.counting(lam) for lam in ladder]
    diag = A.diagonal(counts[-1])
    sq = np.abs(diag - tau) ** 2
    partial = _kernels.compensated_cumsum(sq)
    variance = tuple(float(partial[n - 1] / n) for n in counts)
    extraction = extract_density_one(diag, tau, schedule)
    return QEStatistics(
        target=tau,
        ladder=tuple(ladder),
        counts=tuple(counts),
        variance=variance,
        verdict=qe_verdict(ladder, variance),
        diagonal=diag,
        extraction=extraction,
        target_source=str(tau_source),
    )


# ---------------------------------------------------------------- time averages


def averaged_column_norms(model, A, T, n):
    """``||A_T e_k||^2`` for ``k < n``, rows taken as far as the band reaches."""
    if not isinstance(A, MatrixOracle):
        raise InvalidArgument("expected an operator")
    rows = A.reach(n)
    M = A.matrix(rows, n).tocoo()
    lam = model.eigenvalues(rows)
    kappa = _kernels.flow_kernel(lam[M.row] - lam[M.col], T)
    w = np.abs(M.data * kappa) ** 2
    return np.bincount(M.col, weights=w, minlength=n)


def time_average_criterion(model, A, T_ladder, lam, horizon=None, weyl_ladder=None,
                           tol=seq.DEFAULT_MEASURABLE_TOL):
    """Time-average ergodicity check.

    For each ``T`` the log mean of ``||A_T e_k||^2`` is compared with
    ``|tau(A)|^2``, both as normalised integrals.  ``extras`` also carries
    the same quantities with the Weyl constant ``C`` restored
    (``C * lhs`` against ``|C tau|^2``).
    """
    T_ladder = _check_ladder(T_ladder, "T ladder")
    n = model.counting(lam)
    horizon = n - 1 if horizon is None else int(horizon)
    if not 0 < horizon < n:
        raise InvalidArgument(f"horizon must lie in (0, N(lambda) = {n})")
    hz = sorted({max(horizon // 100, 1), max(horizon // 10, 1), horizon})

    lhs, drifts = [], []
    for T in T_ladder:
        y = averaged_column_norms(model, A, T, horizon + 1)
        x = seq.log_mean_tail(y)
        sur = seq.omega_surrogate(x, hz, tol)
        lhs.append(float(sur.value))
        drifts.append(sur.drift)

    tau = log_mean_diagonal(model, A, hz, tol=tol).value
    rhs = abs(tau) ** 2
    wl = weyl_ladder or [lam / 8, lam / 4, lam / 2, lam]
    C = weyl_fit(model, wl).constant

    stable = len(lhs) < 2 or abs(lhs[-1] - lhs[-2]) <= QE_STABLE_RTOL * max(abs(lhs[-1]), 1e-300)
    if abs(lhs[-1] - rhs) <= tol:
        verdict = "ergodicity-consistent"
    elif stable and lhs[-1] > rhs + tol:
        verdict = "ergodicity-violated"
    else:
        verdict = "inconclusive"
    extras = {
        "rhs": rhs,
        "tau": tau,
        "weyl_constant": C,
        "lhs_scaled": [C * v for v in lhs],
        "rhs_scaled": abs(C * tau) ** 2,
        "horizons": hz,
        "drift_per_T": drifts,
        "verdict": verdict,
        "cutoff": lam,
    }
    return _report("time_average_criterion", model, A, T_ladder, lhs, tol, extras)
