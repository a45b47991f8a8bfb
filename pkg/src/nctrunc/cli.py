"""Command-line entry point: ``nctrunc <subcommand> ...``.

Every subcommand except ``run`` builds a one-diagnostic experiment config
from its flags and hands it to the batch runner, so both paths share the
same output format and exit codes.
"""

import argparse
import json
import logging
import os
import re
import sys

from .config import ExperimentConfig
from .errors import InvalidArgument, NCTruncError
from .runner import run_experiment


def _floats(text):
    try:
        return [float(x) for x in re.split(r"[,\s]+", text.strip()) if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers: {text!r}")


def parse_model(text):
    """Model descriptor from ``name``, ``name:key=value,...``, JSON, or a JSON file.

    ``torus:d=2,theta=0.3`` sets the upper off-diagonal entry of a 2x2 theta.
    """
    text = text.strip()
    if text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidArgument(f"--model is not valid JSON: {exc}") from None
    if text.endswith(".json") and os.path.exists(text):
        with open(text, encoding="utf-8") as fh:
            return json.load(fh)
    name, _, opts = text.partition(":")
    desc = {"name": {"torus": "nc_torus", "ac": "almost_commutative"}.get(name, name)}
    for item in filter(None, opts.split(",")):
        key, eq, value = item.partition("=")
        if not eq:
            raise InvalidArgument(f"bad model option {item!r}")
        try:
            desc[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            raise InvalidArgument(f"bad value for model option {key!r}") from None
    if desc["name"] == "nc_torus" and isinstance(desc.get("theta"), (int, float)):
        t = float(desc["theta"])
        desc["theta"] = [[0.0, t], [-t, 0.0]]
    return desc


def _common(p, needs_op=True):
    p.add_argument("--model", required=True, help="model name, name:opts, JSON, or JSON file")
    if needs_op:
        p.add_argument("--op", required=True, help="operator expression")
    p.add_argument("--lambda-ladder", type=_floats, help="comma-separated cutoffs")
    p.add_argument("--out", help="directory for CSV and summary.json")
    p.add_argument("--tol", type=float, help="drift tolerance for the measurable flag")
    p.add_argument("--max-modes", type=int, help="enumeration cap")
    p.add_argument("--expect", type=float, help="assert the value equals this target")
    p.add_argument("--atol", type=float, default=0.0)
    p.add_argument("--rtol", type=float, default=0.0)


def build_parser():
    parser = argparse.ArgumentParser(prog="nctrunc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("weyl", help="fit N(lambda) ~ C lambda^d")
    _common(p, needs_op=False)

    p = sub.add_parser("integrate", help="noncommutative integral estimators")
    _common(p)
    p.add_argument("--estimator", default="all",
                   choices=["truncated", "log_mean", "dixmier", "heat", "weighted", "all"])
    p.add_argument("--horizons", type=_floats)
    p.add_argument("--t-ladder", type=_floats)
    p.add_argument("--s", type=float, help="weight exponent for --estimator weighted")

    p = sub.add_parser("szego", help="Szego functional for polynomial f with f(0)=0")
    _common(p)
    p.add_argument("--f", type=_floats, default=[0.0, 0.0, 1.0],
                   help="coefficients c0,c1,... of f (default x^2)")
    p.add_argument("--horizons", type=_floats)
    p.add_argument("--method", default="eig", choices=["eig", "power"],
                   help="eigenvalues of dense truncations, or sparse matrix powers")

    p = sub.add_parser("widom", help="Widom cross-term ratio")
    _common(p)
    p.add_argument("--op-b", help="second operator (default: same as --op)")

    p = sub.add_parser("qe", help="quantum-ergodicity variance ladder")
    _common(p)
    p.add_argument("--tau-source", default="log_mean", choices=["log_mean", "truncated", "heat"])

    p = sub.add_parser("frohlich", help="Gibbs-weighted functional as t -> beta")
    _common(p)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--t-ladder", type=_floats)

    p = sub.add_parser("timeavg", help="time-average ergodicity criterion")
    _common(p)
    p.add_argument("--T", type=_floats, default=[1.0, 10.0, 100.0])
    p.add_argument("--lambda", dest="cutoff", type=float, default=64.0)
    p.add_argument("--horizon", type=int)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--out")
    return parser


def config_from_args(args):
    est = {"id": args.command, "kind": args.command}
    if args.command == "integrate":
        est["kind"] = "integrate"
        est["estimator"] = args.estimator
        if args.horizons:
            est["horizons"] = [int(h) for h in args.horizons]
        if args.t_ladder:
            est["t_ladder"] = args.t_ladder
        if args.estimator == "weighted":
            if args.s is None:
                raise InvalidArgument("--estimator weighted needs --s")
            est["s"] = args.s
    elif args.command == "szego":
        est["f"] = args.f
        if args.method != "eig":
            est["method"] = args.method
        if args.horizons:
            est["horizons"] = [int(h) for h in args.horizons]
    elif args.command == "widom" and args.op_b:
        est["op_b"] = args.op_b
    elif args.command == "qe":
        est["tau_source"] = args.tau_source
    elif args.command == "frohlich":
        est["beta"] = args.beta
        if args.t_ladder:
            est["t_ladder"] = args.t_ladder
    elif args.command == "timeavg":
        est.update(T=args.T, **{"lambda": args.cutoff})
        if args.horizon is not None:
            est["horizon"] = args.horizon
    if getattr(args, "op", None):
        est["op"] = args.op
    if args.lambda_ladder:
        est["ladder"] = args.lambda_ladder
    if args.expect is not None:
        est["assert"] = {"target": args.expect, "atol": args.atol, "rtol": args.rtol}
    return ExperimentConfig(
        model=parse_model(args.model),
        estimators=[est],
        tolerances={} if args.tol is None else {"measurable": args.tol},
        limits={} if args.max_modes is None else {"max_modes": args.max_modes},
    )


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.command == "run":
            config = ExperimentConfig.load(args.config)
        else:
            config = config_from_args(args)
    except NCTruncError as exc:
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc),
                                    "exit_code": exc.exit_code}}))
        return exc.exit_code
    result = run_experiment(config, args.out)
    print(json.dumps(result.summary, indent=2, sort_keys=True))
    return result.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
