"""Batch execution of an :class:`ExperimentConfig`.

Each diagnostic writes ``<id>.csv``; the run writes ``summary.json``.  CSV
bodies carry no timestamps, so identical configs give identical files.
"""

import csv
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field

from . import ergo, integrals, seq
from .config import SCHEMA_VERSION, ExperimentConfig
from .errors import InvalidArgument, NCTruncError
from .expr import parse_operator
from .integrals import EstimateReport, _jsonable
from .models import DEFAULT_MODE_CAP, model_from_descriptor
from .trunc import DEFAULT_DENSE_CAP

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INVALID, EXIT_RESOURCE, EXIT_ASSERT = 0, 2, 3, 4


@dataclass
class RunResult:
    exit_code: int
    summary: dict
    outputs: dict = field(default_factory=dict)  # id -> CSV text


def _weyl_report(model, fit):
    ladder = fit.ladder
    values = [n / lam**model.dimension for lam, n in zip(ladder, fit.counts)]
    rep = integrals._report("weyl_fit", model, "N(lambda)", ladder, values,
                            seq.DEFAULT_MEASURABLE_TOL)
    rep.value = complex(fit.constant)
    rep.extras = {"dimension": fit.dimension, "constant": fit.constant,
                  "residual": fit.residual, "counts": list(fit.counts)}
    return rep


def _reports_csv(reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(integrals.CSV_COLUMNS)
    for rep in reports:
        w.writerows(rep.csv_rows())
    return buf.getvalue()


class _Context:
    def __init__(self, config):
        self.config = config
        desc = dict(config.model)
        limits = config.limits or {}
        desc.setdefault("max_modes", int(limits.get("max_modes", DEFAULT_MODE_CAP)))
        self.model = model_from_descriptor(desc)
        self.dense_cap = int(limits.get("dense_cap", DEFAULT_DENSE_CAP))
        self.tol = float((config.tolerances or {}).get("measurable", seq.DEFAULT_MEASURABLE_TOL))
        self._ops = {}

    def op(self, name):
        if name is None:
            raise InvalidArgument("diagnostic needs an 'op'")
        src = self.config.operators.get(name, name)
        if src not in self._ops:
            self._ops[src] = parse_operator(src, self.model)
        return self._ops[src]

    def ladder(self, est, key="ladder", family="lambda"):
        value = est.get(key, (self.config.ladders or {}).get(family))
        return None if value is None else [float(x) for x in value]


def _run_one(ctx, est):
    """Returns (primary result, reports for the CSV or None for QE statistics)."""
    kind = est["kind"]
    model = ctx.model
    tol = ctx.tol
    if kind == "weyl":
        ladder = ctx.ladder(est) or integrals.default_lambda_ladder(model)
        rep = _weyl_report(model, integrals.weyl_fit(model, ladder))
        return rep, [rep]
    if kind == "integrate":
        A = ctx.op(est.get("op"))
        which = est.get("estimator", "all")
        lam = ctx.ladder(est)
        hz = ctx.ladder(est, "horizons", "horizons")
        hz = None if hz is None else [int(h) for h in hz]
        heat = ctx.ladder(est, "t_ladder", "heat")
        window = est.get("window")
        if which == "truncated":
            rep = integrals.truncated_integral(model, A, lam, tol)
        elif which == "log_mean":
            rep = integrals.log_mean_diagonal(model, A, hz, window, tol)
        elif which == "dixmier":
            rep = integrals.dixmier_diagonal(model, A, est.get("d"), hz, window, tol)
        elif which == "heat":
            rep = integrals.heat_integral(model, A, heat, tol)
        elif which == "weighted":
            rep = integrals.weighted_dixmier(model, A, float(est["s"]), lam, window, tol)
        else:
            reps = [
                integrals.truncated_integral(model, A, lam, tol),
                integrals.log_mean_diagonal(model, A, hz, window, tol),
                integrals.heat_integral(model, A, heat, tol),
            ]
            vals = [r.value for r in reps]
            spread = max(abs(a - b) for a in vals for b in vals)
            head = reps[0]
            head.extras = dict(head.extras, concordance=spread,
                               estimates={r.estimator: r.value for r in reps})
            return head, reps
        return rep, [rep]
    if kind == "szego":
        A = ctx.op(est.get("op"))
        f = est.get("f")
        if not isinstance(f, list):
            raise InvalidArgument("szego needs 'f' as a list of polynomial coefficients")
        lam = ctx.ladder(est) or integrals.default_lambda_ladder(model, ctx.dense_cap)
        hz = ctx.ladder(est, "horizons", "horizons")
        hz = None if hz is None else [int(h) for h in hz]
        lhs, rhs = ergo.szego_functional(model, A, f, lam, hz, ctx.dense_cap, tol,
                                         est.get("method", "eig"))
        lhs.extras["rhs"] = rhs.value
        return lhs, [rhs, lhs]
    if kind == "widom":
        A, B = ctx.op(est.get("op")), ctx.op(est.get("op_b", est.get("op")))
        lam = ctx.ladder(est) or integrals.default_lambda_ladder(model)
        rep = ergo.widom_ratio(model, A, B, lam, tol=tol)
        return rep, [rep]
    if kind == "qe":
        A = ctx.op(est.get("op"))
        stats = ergo.qe_statistics(model, A, ctx.ladder(est), est.get("tau_source", "log_mean"))
        return stats, None
    if kind == "frohlich":
        A = ctx.op(est.get("op"))
        rep = integrals.frohlich(model, A, float(est.get("beta", 0.0)),
                                 ctx.ladder(est, "t_ladder", "heat"),
                                 ctx.ladder(est, "compare_ladder", "lambda"), tol)
        return rep, [rep]
    if kind == "timeavg":
        A = ctx.op(est.get("op"))
        T = ctx.ladder(est, "T", "T") or [1.0, 10.0, 100.0]
        lam = float(est.get("lambda", 64.0))
        rep = ergo.time_average_criterion(model, A, T, lam, est.get("horizon"), tol=tol)
        return rep, [rep]
    raise InvalidArgument(f"unknown diagnostic kind {kind!r}")


def check_assertion(result, spec):
    """Evaluate an ``assert`` dict against a report or QE statistics."""
    if not spec:
        return None
    if isinstance(result, ergo.QEStatistics):
        value = complex(result.variance[-1])
        verdict = result.verdict
        measurable = None
    else:
        value = complex(result.value)
        verdict = result.extras.get("verdict")
        measurable = result.measurable
    ok = True
    if "target" in spec:
        target = complex(spec["target"])
        bound = float(spec.get("atol", 0.0)) + float(spec.get("rtol", 0.0)) * abs(target)
        ok &= abs(value - target) <= bound
    if "min" in spec:
        ok &= value.real >= float(spec["min"])
    if "max" in spec:
        ok &= value.real <= float(spec["max"])
    if "verdict" in spec:
        ok &= verdict == spec["verdict"]
    if "measurable" in spec:
        ok &= measurable == bool(spec["measurable"])
    if "concordance" in spec:
        ok &= result.extras.get("concordance", math.inf) <= float(spec["concordance"])
    return bool(ok)


def run_experiment(config, out_dir=None):
    """Run every diagnostic of ``config``; never raises for library errors."""
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.from_dict(config)
    out_dir = out_dir or (config.output or {}).get("dir")
    summary = {"schema_version": SCHEMA_VERSION, "model": config.model, "results": []}
    outputs = {}
    exit_code = EXIT_OK
    try:
        ctx = _Context(config)
        for i, est in enumerate(config.estimators):
            eid = est.get("id", f"{est['kind']}_{i}")
            result, reports = _run_one(ctx, est)
            text = result.to_csv() if reports is None else _reports_csv(reports)
            outputs[eid] = text
            passed = check_assertion(result, est.get("assert"))
            record = {"id": eid, "kind": est["kind"], "csv": f"{eid}.csv", "passed": passed}
            if isinstance(result, EstimateReport):
                record.update(value=result.value, drift=result.drift,
                              measurable=result.measurable, extras=result.extras)
            else:
                record.update(result.to_dict())
            summary["results"].append(_jsonable(record))
            if passed is False:
                exit_code = EXIT_ASSERT
    except NCTruncError as exc:
        exit_code = exc.exit_code
        summary["error"] = {"type": type(exc).__name__, "message": str(exc),
                            "exit_code": exc.exit_code}
    except MemoryError as exc:  # pragma: no cover
        exit_code = EXIT_RESOURCE
        summary["error"] = {"type": "ResourceLimit", "message": str(exc), "exit_code": 3}
    summary["exit_code"] = exit_code
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        for eid, text in outputs.items():
            with open(os.path.join(out_dir, f"{eid}.csv"), "w", encoding="utf-8",
                      newline="") as fh:
                fh.write(text)
        with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return RunResult(exit_code, summary, outputs)
