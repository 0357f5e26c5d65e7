"""Command-line entry point: ``isac-uav {run,validate,oracle}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from .comm import control_radius_dth
from .optimizer import SearchParams, check_feasibility
from .oracles import SUITES, run_suite
from .output import write_all
from .scenario import Scenario, ScenarioError, load_scenario, reference_scenario_path
from .simulator import DEFAULT_WARMUP, STRATEGIES, monte_carlo, parse_strategies

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_SCENARIO = 2
EXIT_RUNTIME = 3

log = logging.getLogger("isac_uav")


@dataclass(frozen=True)
class RunManifest:
    scenario: str
    strategies: tuple[str, ...]
    runs: int
    seed: int
    out: str
    trace: bool
    epsilon: float
    delta_omega: float
    mc_window: int


def _load(path: str) -> Scenario:
    return load_scenario(path)


def cmd_run(manifest: RunManifest, workers: int | None = None) -> int:
    try:
        scenario = _load(manifest.scenario)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    out = Path(manifest.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory {out}: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    params = SearchParams(epsilon=manifest.epsilon, delta_omega=manifest.delta_omega)

    def progress(done, total):
        log.info("run %d/%d done", done, total)

    try:
        result = monte_carlo(scenario, manifest.strategies, runs=manifest.runs,
                             seed=manifest.seed, params=params, warmup=manifest.mc_window,
                             workers=workers, keep_diagnostics=manifest.trace,
                             progress=progress)
    except Exception as exc:  # noqa: BLE001 - any mid-run failure maps to one exit code
        log.exception("simulation failed")
        print(f"fatal error during simulation: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    paths = write_all(out, result, scenario, asdict(manifest), trace=manifest.trace)
    for name, agg in result.aggregates.items():
        print(f"{name:>9}: location RMSE {agg.location_rmse:.6g} m, velocity RMSE "
              f"{agg.velocity_rmse:.6g} m/s, mean PCRB {agg.mean_pcrb:.6g}, "
              f"violations {agg.violations}, fallbacks {agg.fallbacks}")
    print("wrote " + ", ".join(str(p) for p in paths.values()))
    return EXIT_OK


def cmd_validate(scenario_path: str) -> int:
    try:
        scenario = _load(scenario_path)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    report = check_feasibility(scenario.uav_initial_array, scenario)
    print(f"R_c* = {report.rate_floor:.6g} bit/s (R_th = {scenario.rate_threshold_bps:.6g} bit/s)")
    print(f"d_th = {control_radius_dth(scenario):.6g} m")
    for m, k in enumerate(report.association.bs_index):
        print(f"UAV {m} -> BS {k}, share {report.shares[m]:.6f}")
    print("feasible" if report.feasible else "infeasible")
    return EXIT_OK if report.feasible else EXIT_FAILED


def cmd_oracle(suite: str) -> int:
    reports = run_suite(suite)
    for r in reports:
        print(r.line())
        for d in r.details:
            print(f"    {d}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED


def _strategy_list(text: str) -> tuple[str, ...]:
    try:
        return tuple(parse_strategies(text))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isac-uav", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="repeat for more logging")
    sub = parser.add_subparsers(dest="command", required=True)
    default_scenario = str(reference_scenario_path())

    run = sub.add_parser("run", help="Monte Carlo campaign over one or more strategies")
    run.add_argument("--scenario", default=default_scenario,
                     help="scenario JSON (default: packaged reference scenario)")
    run.add_argument("--strategy", type=_strategy_list, default=STRATEGIES,
                     help=f"comma-separated subset of {','.join(STRATEGIES)}")
    run.add_argument("--runs", type=int, default=100, help="Monte Carlo runs per strategy")
    run.add_argument("--seed", type=int, default=None,
                     help="base seed (default: the scenario's seed)")
    run.add_argument("--out", default="results", help="output directory")
    run.add_argument("--trace", action="store_true",
                     help="also write per-interval solver diagnostics to trace.jsonl")
    run.add_argument("--epsilon", type=float, default=SearchParams.epsilon,
                     help="relative-decrease stopping threshold of the searches")
    run.add_argument("--delta-omega", type=float, default=SearchParams.delta_omega,
                     help="line-search step in (0, 1]")
    run.add_argument("--mc-window", type=int, default=DEFAULT_WARMUP,
                     help="first interval included in RMSE / NEES averages")
    run.add_argument("--workers", type=int, default=None,
                     help="worker processes (default: one per CPU)")

    val = sub.add_parser("validate", help="feasibility check at the initial positions")
    val.add_argument("--scenario", default=default_scenario)

    ora = sub.add_parser("oracle", help="brute-force oracle suites")
    ora.add_argument("suite", nargs="?", default="all", choices=(*SUITES, "all"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "validate":
        return cmd_validate(args.scenario)
    if args.command == "oracle":
        return cmd_oracle(args.suite)
    if args.runs < 1:
        print("--runs must be >= 1", file=sys.stderr)
        return EXIT_SCENARIO
    if not 0 < args.delta_omega <= 1 or args.epsilon < 0:
        print("--delta-omega must lie in (0, 1] and --epsilon must be >= 0", file=sys.stderr)
        return EXIT_SCENARIO
    seed = args.seed
    if seed is None:
        try:
            seed = _load(args.scenario).seed
        except ScenarioError as exc:
            print(f"scenario error: {exc}", file=sys.stderr)
            return EXIT_SCENARIO
    manifest = RunManifest(
        scenario=args.scenario, strategies=tuple(args.strategy), runs=args.runs,
        seed=int(seed), out=args.out, trace=args.trace, epsilon=args.epsilon,
        delta_omega=args.delta_omega, mc_window=args.mc_window)
    return cmd_run(manifest, workers=args.workers)


if __name__ == "__main__":
    sys.exit(main())
