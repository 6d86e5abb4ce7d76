"""
Command-line interface of `magconfine`.

    magconfine simulate --scenario fig1 --out runs/fig1
    magconfine check    --scenario fig3 --out runs/fig3
    magconfine verify   --scenario annulus --out runs/annulus --workers 4
    magconfine plot     --scenario fig1 --out runs/fig1

`--scenario` takes a JSON file or the name of a shipped scenario. Exit codes:
0 success, 2 scenario / parse / chart error, 3 verification failure,
4 integrator failure.
"""

import argparse
import glob
import json
import logging
import os
import sys
from importlib.metadata import PackageNotFoundError, version
from typing import Optional, Sequence

from ._expression import ExpressionError
from ._utils import QuadratureError
from .field import DecompositionError
from .geometry import ChartError
from .output import (
    OutputFormatError,
    plot_trajectories,
    read_trajectory_csv,
    trajectory_filename,
    write_report,
    write_trajectory_csv,
)
from .runner import SimulationResult, run_check, run_simulation, run_verification
from .scenario import ScenarioError, list_builtin, resolve_scenario

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_SCENARIO = 2
EXIT_VERIFICATION = 3
EXIT_INTEGRATOR = 4

USER_ERRORS = (ScenarioError, ExpressionError, ChartError, DecompositionError, OutputFormatError)


def _version() -> str:
    try:
        return version("magconfine")
    except PackageNotFoundError:
        return "unknown"


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magconfine",
        description="Simulate charged particles in magnetic fields that blow up at "
        "the boundary of a disc or annulus, and check the confinement bounds.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--scenario",
        help="scenario JSON file or shipped scenario name (%s)" % ", ".join(list_builtin()),
    )
    common.add_argument("--out", default=".", help="output directory (default: .)")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--particles", type=int, help="override the number of particles")
    common.add_argument("--workers", type=_positive_int, default=1, help="worker processes (default: 1)")
    common.add_argument("--quiet", action="store_true", help="only log warnings and errors")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="integrate trajectories, write CSV and report.json")
    sub.add_parser("check", parents=[common], help="check the field hypotheses, write check.json")
    sub.add_parser("verify", parents=[common], help="simulate and verify the bounds, write verify.json")
    plot = sub.add_parser("plot", parents=[common], help="draw trajectory CSVs as trajectories.svg")
    plot.add_argument("--csv", nargs="+", help="trajectory CSVs (default: all in --out)")
    return parser


def _load(args):
    if not args.scenario:
        raise ScenarioError("--scenario is required for this command")
    scenario = resolve_scenario(args.scenario)
    return scenario.with_overrides(seed=args.seed, particles=args.particles)


def _write_trajectories(result: SimulationResult, out: str):
    for trajectory in result.trajectories:
        write_trajectory_csv(trajectory, os.path.join(out, trajectory_filename(trajectory.index)))


def _simulate(args) -> int:
    scenario = _load(args)
    result = run_simulation(scenario, workers=args.workers, verbose=not args.quiet)
    _write_trajectories(result, args.out)
    write_report(result.to_report(), os.path.join(args.out, "report.json"))
    if result.failures:
        log.error("Integrator failure for particle(s) %s", result.failures)
        return EXIT_INTEGRATOR
    return EXIT_OK


def _check(args) -> int:
    scenario = _load(args)
    result = run_check(scenario, verbose=not args.quiet)
    write_report(result.to_report(), os.path.join(args.out, "check.json"))
    return EXIT_OK


def _verify(args) -> int:
    scenario = _load(args)
    result = run_verification(scenario, workers=args.workers, verbose=not args.quiet)
    _write_trajectories(result.simulation, args.out)
    write_report(result.to_report(), os.path.join(args.out, "verify.json"))
    if result.simulation.failures:
        log.error("Integrator failure for particle(s) %s", result.simulation.failures)
        return EXIT_INTEGRATOR
    if not result.passed:
        log.error("Verification failed: %s", result.worst())
        return EXIT_VERIFICATION
    return EXIT_OK


def _plot(args) -> int:
    paths = args.csv or sorted(glob.glob(os.path.join(args.out, "trajectory_*.csv")))
    trajectories = [read_trajectory_csv(p) for p in paths]
    trajectories.sort(key=lambda t: t.index)

    if args.scenario:
        scenario = resolve_scenario(args.scenario)
        domain = {"kind": scenario.domain.kind}
        domain.update(
            {"R": scenario.domain.R}
            if scenario.domain.kind == "disc"
            else {"R1": scenario.domain.R1, "R2": scenario.domain.R2}
        )
        title = scenario.field
    else:
        report_path = os.path.join(args.out, "report.json")
        if not os.path.exists(report_path):
            raise ScenarioError("plot needs --scenario or a report.json in --out")
        try:
            with open(report_path, encoding="utf-8") as f:
                report = json.load(f)
            domain, title = report["domain"], report.get("field")
        except (ValueError, KeyError) as exc:
            raise OutputFormatError(f"Malformed report {report_path!r}: {exc!r}") from None

    plot_trajectories(trajectories, domain, os.path.join(args.out, "trajectories.svg"), title=title)
    return EXIT_OK


COMMANDS = {"simulate": _simulate, "check": _check, "verify": _verify, "plot": _plot}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](args)
    except QuadratureError as exc:
        log.error("%s", exc)
        return EXIT_INTEGRATOR
    except USER_ERRORS as exc:
        log.error("%s", exc)
        return EXIT_SCENARIO


if __name__ == "__main__":
    sys.exit(main())
