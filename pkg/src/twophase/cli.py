"""Command-line entry point.

    twophase run <scenario.cfg> [--method M] [--out DIR]
    twophase bench <suite.cfg> [--out DIR] [--workers N]
    twophase spectrum <scenario.cfg> --method M --newton K [--out FILE]
    twophase validate <scenario.cfg> [--dump]

Exit codes: 0 success, 2 invalid input, 3 solver failure.  Setting
``TWOPHASE_OUTPUT_DIR`` redirects all output files.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .bench import dump_spectrum, load_suite, run_benchmark, run_scenario
from .config import OUTPUT_DIR_ENV, ScenarioError, dump_scenario, load_scenario
from .precond import DISPLAY_NAMES, canonical_method
from .sparsela import SpectrumError

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3

log = logging.getLogger("twophase")


def _method(text):
    try:
        return canonical_method(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _out_dir(arg, default):
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env)
    return Path(arg) if arg else Path(default)


def cmd_run(args):
    scenario = load_scenario(args.scenario)
    if args.method:
        scenario = replace(scenario, precond=scenario.precond.with_variant(args.method))
    out = _out_dir(args.out, scenario.output_dir())
    result = run_scenario(scenario, out)
    m = result.metrics
    print(f"{scenario.name} [{DISPLAY_NAMES[scenario.precond.variant]}]: NI={m.newton_iterations} "
          f"LI={m.linear_iterations} LI/NI={m.li_per_ni:.2f} steps={len(m.steps)} cuts={m.step_cut_count} "
          f"wall={m.wall_seconds:.2f}s -> {out}")
    if not m.converged:
        print(f"solver failure at step {m.failed_step}: {m.failure}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_bench(args):
    suite = load_suite(args.suite)
    out = _out_dir(args.out, Path(args.suite).parent / "output")
    rows = run_benchmark(suite, out, workers=args.workers)
    print(f"{'scenario':<24}{'method':<8}{'NI':>6}{'LI':>8}{'LI/NI':>9}{'time':>9}  converged")
    for r in rows:
        print(f"{r['scenario']:<24}{r['method']:<8}{r['NI']:>6}{r['LI']:>8}{r['LI_per_NI']:>9.2f}"
              f"{r['wall_seconds']:>9.2f}  {r['converged']}")
    print(f"wrote {out / (suite.name + '.csv')}")
    return EXIT_OK


def cmd_spectrum(args):
    scenario = load_scenario(args.scenario)
    default = scenario.output_dir() / f"spectrum_{args.method}_newton{args.newton}.csv"
    if os.environ.get(OUTPUT_DIR_ENV):
        path = Path(os.environ[OUTPUT_DIR_ENV]) / Path(args.out or default).name
    else:
        path = Path(args.out) if args.out else default
    try:
        vals = dump_spectrum(scenario, args.method, args.newton, path)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    mags = abs(vals)
    print(f"{len(vals)} eigenvalues of J M^-1 ({DISPLAY_NAMES[args.method]}): min |lambda| = {mags.min():.4g}, "
          f"max |lambda| = {mags.max():.4g} -> {path}")
    return EXIT_OK


def cmd_validate(args):
    scenario = load_scenario(args.scenario)
    if args.dump:
        sys.stdout.write(dump_scenario(scenario))
    else:
        print(f"{args.scenario}: ok ({scenario.name}, {scenario.num_cells} cells, "
              f"method {DISPLAY_NAMES[scenario.precond.variant]})")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="twophase", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("scenario")
    p.add_argument("--method", type=_method, help="override the scenario's preconditioner")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="run a benchmark suite and write CSV/JSON tables")
    p.add_argument("suite")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, default=1, help="parallel processes")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("spectrum", help="eigenvalues of the preconditioned first-step Jacobian")
    p.add_argument("scenario")
    p.add_argument("--method", type=_method, required=True)
    p.add_argument("--newton", type=int, default=0, help="Newton iteration index (0-based)")
    p.add_argument("--out", help="CSV file")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("scenario")
    p.add_argument("--dump", action="store_true", help="print the scenario back in SI units")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RuntimeError, ArithmeticError, SpectrumError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
