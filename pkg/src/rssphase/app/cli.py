"""Command-line entry point.

Exit codes: 0 on success, 2 for configuration or input errors, 3 for
numerical failures.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, replace

from ..diagnostics import convergence_errors, fit_slope, predict_bounds
from ..errors import ConfigError, ImageFormatError, RSSError
from ..operators import Kind, operator_pair
from .config import Problem, load_config
from .runner import run_experiment, scheme_config

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _jsonable(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def _cmd_run(args, overrides=None):
    cfg = load_config(args.config)
    if overrides:
        cfg = replace(cfg, **overrides).resolved()
    result = run_experiment(cfg)
    print(json.dumps({k: v for k, v in result.summary.items() if k != "config"}, indent=2))
    return EXIT_OK


def _cmd_stability(args):
    cfg = load_config(args.config)
    A, B = operator_pair(cfg.operator_kind, cfg.n, cfg.dim)
    report = predict_bounds(A, B, scheme_config(cfg))
    payload = asdict(report)
    payload["dt_bound_ac_effective"] = report.dt_bound_ac_effective
    print(json.dumps(_jsonable(payload), indent=2))
    return EXIT_OK


def _cmd_convergence(args):
    if args.nmin < 8 or args.nmax < args.nmin:
        raise ConfigError("need 8 <= nmin <= nmax")
    intervals = []
    m = args.nmin
    while m <= args.nmax:
        intervals.append(m)
        m *= 2
    if len(intervals) < 2:
        raise ConfigError("need at least two grid sizes (nmax >= 2 nmin)")
    h_list = [1.0 / m for m in intervals]
    errors = convergence_errors(args.kind, h_list)
    print("h,error")
    for h, e in zip(h_list, errors):
        print(f"{float(h)!r},{float(e)!r}")
    print(f"slope,{float(fit_slope(h_list, errors))!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rssphase", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the experiment described by a config file")
    p.add_argument("config")

    p = sub.add_parser("stability", help="print Hypothesis-H constants and step bounds")
    p.add_argument("config")

    p = sub.add_parser("convergence", help="spatial convergence study on cos(x(1-x))")
    p.add_argument("kind", choices=[k.value for k in Kind])
    p.add_argument("nmin", type=int, help="coarsest number of intervals")
    p.add_argument("nmax", type=int, help="finest number of intervals (doubling from nmin)")

    p = sub.add_parser("inpaint", help="Cahn-Hilliard inpainting of a PGM image")
    p.add_argument("config")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True, help="PGM mask, white = known pixel")

    p = sub.add_parser("segment", help="Allen-Cahn segmentation of a PGM image")
    p.add_argument("config")
    p.add_argument("--image", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "stability":
            return _cmd_stability(args)
        if args.command == "convergence":
            return _cmd_convergence(args)
        if args.command == "inpaint":
            return _cmd_run(args, dict(problem=Problem.INPAINT, scheme=None, project_mean=None,
                                       initial_condition=args.image, mask_path=args.mask))
        if args.command == "segment":
            return _cmd_run(args, dict(problem=Problem.SEGMENT, scheme=None, project_mean=None,
                                       initial_condition=args.image))
    except (ConfigError, ImageFormatError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RSSError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_CONFIG  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
