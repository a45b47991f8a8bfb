"""Estimators of the normalised noncommutative integral and of Tr_w(<D>^-d).

Every estimator evaluates a finite sequence along a ladder (cutoffs,
horizons, or heat parameters) and reports the top-of-ladder value with the
drift over the upper half of the ladder.
"""

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels, seq
from .errors import InvalidArgument
from .oracles import Identity
from .trunc import heat_cutoff, heat_trace

DEFAULT_LAMBDA_LADDER = tuple(2.0**p for p in range(5, 12))
DEFAULT_HEAT_LADDER = (1e-1, 1e-2, 1e-3, 1e-4)
DEFAULT_HORIZONS = (1_000, 10_000, 100_000)
DEFAULT_MODE_BUDGET = 1_000_000
DEFAULT_HEAT_BUDGET = 4_000_000

CSV_COLUMNS = (
    "estimator",
    "model",
    "operator",
    "ladder_point",
    "value_re",
    "value_im",
    "drift",
    "measurable",
)


def _jsonable(v):
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


@dataclass
class EstimateReport:
    estimator: str
    model: str
    expression: str
    ladder: tuple
    values: tuple
    value: complex
    drift: float
    measurable: bool
    tolerance: float = seq.DEFAULT_MEASURABLE_TOL
    extras: dict = field(default_factory=dict)

    @property
    def real(self):
        return float(np.real(self.value))

    def to_dict(self):
        return _jsonable(asdict(self))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def csv_rows(self):
        rows = []
        for point, v in zip(self.ladder, self.values):
            v = complex(v)
            rows.append(
                [
                    self.estimator,
                    self.model,
                    self.expression,
                    repr(float(point)),
                    repr(v.real),
                    repr(v.imag),
                    repr(float(self.drift)),
                    str(bool(self.measurable)).lower(),
                ]
            )
        return rows

    def to_csv(self, header=True):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(CSV_COLUMNS)
        w.writerows(self.csv_rows())
        return buf.getvalue()


def _report(name, model, A, ladder, values, tol, extras=None):
    values = np.asarray(values)
    sur = seq.surrogate_from_values(ladder, values, tol)
    return EstimateReport(
        estimator=name,
        model=model.name,
        expression=getattr(A, "label", str(A)),
        ladder=tuple(float(x) for x in ladder),
        values=tuple(complex(v) for v in values),
        value=complex(sur.value),
        drift=sur.drift,
        measurable=sur.measurable,
        tolerance=tol,
        extras=extras or {},
    )


# ---------------------------------------------------------------- ladders


def default_lambda_ladder(model, budget=DEFAULT_MODE_BUDGET):
    """Geometric cutoffs 2^5..2^11, dropping those beyond ``budget`` modes."""
    out = [lam for lam in DEFAULT_LAMBDA_LADDER if model.weyl_estimate(lam) <= budget]
    return tuple(out or DEFAULT_LAMBDA_LADDER[:3])


def default_heat_ladder(model, squared=True, budget=DEFAULT_HEAT_BUDGET):
    out = [
        t for t in DEFAULT_HEAT_LADDER if model.weyl_estimate(heat_cutoff(t, squared)) <= budget
    ]
    return tuple(out or DEFAULT_HEAT_LADDER[:2])


def default_horizons(model, budget=DEFAULT_MODE_BUDGET):
    out = [n for n in DEFAULT_HORIZONS if n <= budget]
    return tuple(out)


def _check_ladder(ladder, what="ladder", increasing=True):
    ladder = [float(x) for x in ladder]
    if not ladder:
        raise InvalidArgument(f"{what} is empty")
    if any(x <= 0 for x in ladder):
        raise InvalidArgument(f"{what} entries must be positive")
    steps = np.diff(ladder)
    if (increasing and np.any(steps <= 0)) or (not increasing and np.any(steps >= 0)):
        order = "increasing" if increasing else "decreasing"
        raise InvalidArgument(f"{what} must be strictly {order}")
    return ladder


# ---------------------------------------------------------------- Weyl law


@dataclass(frozen=True)
class WeylFit:
    dimension: float  # fitted exponent
    constant: float  # N(lambda_max) / lambda_max^d with the model's d
    residual: float
    ladder: tuple
    counts: tuple
    fit_constant: float  # prefactor of the least-squares power law

    @property
    def trace_omega(self):
        """Implied ``Tr_w(<D>^-d)``."""
        return self.constant


def weyl_fit(model, ladder):
    """Least-squares power law through ``(lambda, N(lambda))``."""
    ladder = _check_ladder(ladder, "lambda ladder")
    if len(ladder) < 3 or ladder[-1] < 4 * ladder[0]:
        raise InvalidArgument("Weyl fit needs >= 3 cutoffs spanning a factor >= 4")
    counts = np.array([model.counting(lam) for lam in ladder], dtype=np.float64)
    if np.any(counts <= 0):
        raise InvalidArgument("ladder contains a cutoff below the spectrum")
    x, y = np.log(ladder), np.log(counts)
    slope, intercept = np.polyfit(x, y, 1)
    fitted = np.exp(intercept) * np.asarray(ladder) ** slope
    residual = float(np.max(np.abs(counts / fitted - 1.0)))
    constant = float(counts[-1] / ladder[-1] ** model.dimension)
    return WeylFit(
        float(slope), constant, residual, tuple(ladder), tuple(int(c) for c in counts),
        float(np.exp(intercept)),
    )


# ---------------------------------------------------------------- estimators


def truncated_integral(model, A, ladder=None, tol=seq.DEFAULT_MEASURABLE_TOL):
    """``Tr(P A P) / Tr(P)`` along a cutoff ladder."""
    ladder = _check_ladder(ladder or default_lambda_ladder(model), "lambda ladder")
    counts = [model.counting(lam) for lam in ladder]
    if counts[0] == 0:
        raise InvalidArgument("ladder contains a cutoff below the spectrum")
    diag = A.diagonal(counts[-1])
    partial = _kernels.compensated_cumsum(diag)
    values = [partial[n - 1] / n for n in counts]
    return _report("truncated_integral", model, A, ladder, values, tol, {"counts": counts})


def _horizons(model, horizons):
    horizons = horizons or default_horizons(model)
    return [int(h) for h in _check_ladder(horizons, "horizon ladder")]


def log_mean_diagonal(model, A, horizons=None, window=None, tol=seq.DEFAULT_MEASURABLE_TOL):
    """Logarithmic mean of the diagonal ``<e_k, A e_k>``."""
    horizons = _horizons(model, horizons)
    diag = A.diagonal(horizons[-1] + 1)
    x = seq.log_mean_tail(diag, window)
    sur = seq.omega_surrogate(x, horizons, tol)
    return _report("log_mean_diagonal", model, A, horizons, [x[h] for h in horizons], tol,
                   {"window": window, "measurable_surrogate": sur.measurable})


def dixmier_diagonal(model, A, d=None, horizons=None, window=None,
                     tol=seq.DEFAULT_MEASURABLE_TOL):
    """Unnormalised ``Tr_w(A <D>^-d)`` from weighted diagonal sums.

    ``window="none"`` is the plain ``1/log(n+2)`` normalisation.  The default
    drops the first ``s_n ~ n^(3/4)`` terms and divides by the matching
    ``log(n+2) - log(s_n+1)``; the two differ by a null sequence but the
    windowed one removes the slowly decaying bias of the head.
    """
    d = model.dimension if d is None else float(d)
    if d <= 0:
        raise InvalidArgument("dimension must be positive")
    horizons = _horizons(model, horizons)
    n_max = horizons[-1] + 1
    lam = model.eigenvalues(n_max)
    x = model.angle_bracket(lam) ** (-d) * A.diagonal(n_max)
    partial = _kernels.compensated_cumsum(x)
    starts = seq.window_starts(n_max, window)
    values = []
    for h in horizons:
        s = int(starts[h])
        head = partial[s - 1] if s > 0 else 0.0
        values.append((partial[h] - head) / (math.log(h + 2.0) - math.log(s + 1.0)))
    return _report("dixmier_diagonal", model, A, horizons, values, tol,
                   {"d": d, "window": window})


def weighted_dixmier(model, Q, s, ladder=None, window=None, tol=seq.DEFAULT_MEASURABLE_TOL):
    """Weighted Dixmier formulas for ``Q`` with ``Q <D>^-s`` bounded.

    For ``s > -d``: ``(s/d + 1) * w(M(y))`` with
    ``y_n = Tr(P_n Q P_n) / Tr(P_n)^(s/d+1)`` where ``P_n`` is the spectral
    projection onto eigenvalues ``<= lambda_n``.  For ``s = -d``:
    ``w(Tr(P Q P) / log Tr(P))`` along the cutoff ladder.
    """
    s = float(s)
    d = model.dimension
    if s < -d - 1e-12:
        raise InvalidArgument(f"weighted formula needs s >= -d = {-d}")
    ladder = _check_ladder(ladder or default_lambda_ladder(model), "lambda ladder")
    counts = [model.counting(lam) for lam in ladder]
    if counts[0] < 2:
        raise InvalidArgument("ladder starts below the second eigenvalue")
    n_max = counts[-1]
    table = model.modes(n_max)
    diag = Q.diagonal(n_max)
    partial = _kernels.compensated_cumsum(diag)

    weights = np.abs(diag) * model.angle_bracket(table.lam) ** (-s)
    half = n_max // 2
    head_sup = float(np.max(weights[: max(half, 1)]))
    tail_sup = float(np.max(weights))
    bounded = tail_sup <= 1.1 * head_sup + 1e-12
    extras = {"s": s, "d": d, "bounded_heuristic": bool(bounded),
              "sup_weighted_diagonal": tail_sup, "counts": counts}

    if abs(s + d) <= 1e-12:
        values = [partial[n - 1] / math.log(n) for n in counts]
        extras["branch"] = "s=-d"
        return _report("weighted_dixmier", model, Q, ladder, values, tol, extras)

    ends = _kernels.eigenspace_ends(table.lam2)
    tr_p = (ends + 1).astype(np.float64)
    y = partial[ends] / tr_p ** (s / d + 1.0)
    x = seq.log_mean_tail(y, window)
    values = [(s / d + 1.0) * x[n - 1] for n in counts]
    extras["branch"] = "s>-d"
    extras["raw"] = [(s / d + 1.0) * y[n - 1] for n in counts]
    return _report("weighted_dixmier", model, Q, ladder, values, tol, extras)


def heat_integral(model, A, t_ladder=None, tol=seq.DEFAULT_MEASURABLE_TOL):
    """Heat-trace estimate ``C(a)/C(1)`` with ``C(a) = lim t^{d/2} Tr(a e^{-tD^2})``.

    ``extras["trace_omega"]`` is ``C(1)/Gamma(d/2+1)``.
    """
    t_ladder = _check_ladder(t_ladder or default_heat_ladder(model), "heat ladder",
                             increasing=False)
    d = model.dimension
    one = Identity(model)
    c_a, c_1 = [], []
    for t in t_ladder:
        scale = t ** (d / 2)
        c_a.append(heat_trace(model, A, t) * scale)
        c_1.append(heat_trace(model, one, t) * scale)
    ratios = [a / b for a, b in zip(c_a, c_1)]
    gamma = math.gamma(d / 2 + 1)
    extras = {"C_a": c_a, "C_1": c_1, "trace_omega": c_1[-1] / gamma}
    return _report("heat_integral", model, A, t_ladder, ratios, tol, extras)


def frohlich(model, A, beta=0.0, t_ladder=None, compare_ladder=None,
             tol=seq.DEFAULT_MEASURABLE_TOL):
    """``Tr(A e^{-t|D|}) / Tr(e^{-t|D|})`` as ``t`` decreases to ``beta``.

    Also reports ``truncated_integral`` at ``compare_ladder`` for comparison.
    """
    if beta < 0:
        raise InvalidArgument("beta must be non-negative")
    t_ladder = t_ladder or tuple(
        t for t in default_heat_ladder(model, squared=False) if t > beta
    )
    t_ladder = _check_ladder(t_ladder, "heat ladder", increasing=False)
    if any(t <= beta for t in t_ladder):
        raise InvalidArgument("all ladder points must exceed beta")
    one = Identity(model)
    z = []
    vals = []
    for t in t_ladder:
        zt = float(np.real(heat_trace(model, one, t, squared=False)))
        if not math.isfinite(zt):
            raise InvalidArgument(f"partition function not finite at t={t}")
        z.append(zt)
        vals.append(heat_trace(model, A, t, squared=False) / zt)
    grows = bool(np.all(np.diff(z) > 0))
    comp = truncated_integral(model, A, compare_ladder, tol)
    extras = {
        "beta": beta,
        "partition": z,
        "partition_grows": grows,
        "truncated_integral": comp.value,
        "difference": abs(complex(vals[-1]) - comp.value),
    }
    return _report("frohlich", model, A, t_ladder, vals, tol, extras)
