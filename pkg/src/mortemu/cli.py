"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import __version__
from .config import bundled_config, load_config
from .design import allocate_budget, write_csv
from .emulate import load, save
from .errors import ConfigError, NumericalError
from .harness import (
    PILOT_STREAM,
    AnalyticEstimator,
    build_design,
    build_test_set,
    build_training,
    evaluate,
    fit_emulator,
    run_benchmark,
    run_case_study,
)
from .mortality import simulate_states
from .numcore import RngStream

EXIT_CONFIG, EXIT_NUMERICAL = 2, 3
CASE_STUDIES = ("chen-cox", "two-pop", "cbd")


def _emulator_list(text: str):
    return [e.strip() for e in text.split(",") if e.strip()]


def _common(p: argparse.ArgumentParser, config_required: bool = True):
    p.add_argument("--config", type=Path, required=config_required, help="YAML config file")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--n-tr", type=int, help="training budget (sites x replicates)")
    p.add_argument("--n-out", type=int, help="number of test sites")
    p.add_argument("--n-in", type=int, help="inner benchmark paths per test site")
    p.add_argument("--emulators", type=_emulator_list, help="comma-separated estimator names")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mortemu",
                                     description="Emulators for deferred annuity valuation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw time-T states to CSV")
    _common(p)
    p.add_argument("--n", type=int, default=1000, help="number of draws")
    p.add_argument("--out", type=Path, required=True, help="output CSV")

    p = sub.add_parser("design", help="write the training design to CSV")
    _common(p)
    p.add_argument("--out", type=Path, required=True, help="output CSV")

    p = sub.add_parser("fit", help="simulate training data and save a fitted emulator")
    _common(p)
    p.add_argument("--emulator", required=True, choices=("sk", "ok", "uk", "tps", "spline1d"))
    p.add_argument("--out", type=Path, required=True, help="output JSON")
    p.add_argument("--training-out", type=Path, help="also write the training set CSV")

    p = sub.add_parser("evaluate", help="score saved emulators against a nested MC benchmark")
    _common(p)
    p.add_argument("fits", nargs="+", type=Path, help="emulator JSON files")
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("case-study", help="run a full case study")
    p.add_argument("name", choices=CASE_STUDIES)
    _common(p, config_required=False)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    return parser


def _config(args):
    cfg = load_config(args.config) if args.config else bundled_config(args.name)
    return cfg.with_overrides(seed=args.seed, n_tr=args.n_tr, n_out=args.n_out,
                              n_in=args.n_in, emulators=args.emulators)


def _simulate(args, cfg):
    if args.n < 1:
        raise ConfigError("--n must be positive")
    Z = simulate_states(cfg.model, cfg.state0, cfg.spec.T, RngStream(cfg.seed, PILOT_STREAM + 1),
                        args.n)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"z{j + 1}" for j in range(Z.shape[1])])
        w.writerows([[format(float(v), ".17g") for v in row] for row in Z])
    return [args.out]


def _design(args, cfg):
    design = build_design(cfg, allocate_budget(cfg.n_tr).n_sites)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(args.out, design)
    return [args.out]


def _fit(args, cfg):
    _, train, _ = build_training(cfg)
    fit = fit_emulator(args.emulator, cfg, train)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save(fit, args.out)
    out = [args.out]
    if args.training_out:
        write_csv(args.training_out, train)
        out.append(args.training_out)
    return out


def _evaluate(args, cfg):
    trends = {"analytic": AnalyticEstimator(cfg)}
    fits = {}
    for path in args.fits:
        try:
            fits[path.stem] = load(path, trends)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot load emulator {path}: {exc}") from None
    sites = build_test_set(cfg)
    bench, se = run_benchmark(cfg, sites)
    return evaluate(cfg, sites, bench, se, fits).write(args.out)


def _case_study(args, cfg):
    report = run_case_study(cfg)
    written = report.write(args.out)
    for r in report.results.values():
        print(f"{r.name:12s} {r.status:10.10s} bias={r.bias: .4e} rmse={r.rmse:.4e}")
    return written


_COMMANDS = {"simulate": _simulate, "design": _design, "fit": _fit, "evaluate": _evaluate,
             "case-study": _case_study}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        for path in _COMMANDS[args.command](args, cfg):
            print(f"wrote {path}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
