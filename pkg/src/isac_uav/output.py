"""CSV / JSON writers for simulation results.

All files carry ``schema_version``. CSV headers include units, floats are
written with 17 significant digits so they round-trip exactly, and nothing
time-dependent goes into the CSVs: an identical manifest yields identical bytes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from .scenario import Scenario
from .simulator import MonteCarloResult, RunSummary

SCHEMA_VERSION = 1

TRAJECTORY_COLUMNS = (
    "strategy", "run", "n", "uav", "uav_x_m", "uav_y_m", "bs_index",
    "target_x_m", "target_y_m", "target_vx_mps", "target_vy_mps",
    "est_x_m", "est_y_m", "est_vx_mps", "est_vy_mps",
)
BANDWIDTH_COLUMNS = ("strategy", "run", "n", "uav", "share", "rate_bps", "bs_index")
PCRB_COLUMNS = (
    "strategy", "run", "n", "pcrb_trace", "posterior_trace", "pcrb_position_trace_m2",
    "position_error_sq_m2", "velocity_error_sq_m2ps2", "nees", "feasible", "fallback",
)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


def _writer(path: Path, columns):
    fh = open(path, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow([f"# schema_version={SCHEMA_VERSION}"])
    w.writerow(columns)
    return fh, w


def _runs_in_order(runs: dict[str, list[RunSummary]]):
    for strategy, summaries in runs.items():
        for summary in sorted(summaries, key=lambda s: s.run_index):
            yield strategy, summary


def write_trajectories(path, runs: dict[str, list[RunSummary]]) -> None:
    fh, w = _writer(Path(path), TRAJECTORY_COLUMNS)
    with fh:
        for strategy, s in _runs_in_order(runs):
            for r in s.records:
                for m, q in enumerate(r.positions):
                    w.writerow([_fmt(v) for v in (
                        strategy, s.run_index, r.n, m, q[0], q[1], r.bs_index[m],
                        *r.truth, *r.estimate)])


def write_bandwidth(path, runs: dict[str, list[RunSummary]]) -> None:
    fh, w = _writer(Path(path), BANDWIDTH_COLUMNS)
    with fh:
        for strategy, s in _runs_in_order(runs):
            for r in s.records:
                for m in range(len(r.shares)):
                    w.writerow([_fmt(v) for v in (
                        strategy, s.run_index, r.n, m, r.shares[m], r.rates[m], r.bs_index[m])])


def write_pcrb(path, runs: dict[str, list[RunSummary]]) -> None:
    fh, w = _writer(Path(path), PCRB_COLUMNS)
    with fh:
        for strategy, s in _runs_in_order(runs):
            for r in s.records:
                w.writerow([_fmt(v) for v in (
                    strategy, s.run_index, r.n, r.pcrb_trace, r.posterior_trace,
                    r.pcrb_position_trace, r.position_error_sq, r.velocity_error_sq, r.nees,
                    r.feasible, r.fallback)])


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if is_dataclass(obj):
        return asdict(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def summary_dict(result: MonteCarloResult, scenario: Scenario, manifest: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "manifest": manifest,
        "scenario": scenario.to_dict(),
        "aggregates": {s: a.to_dict() for s, a in result.aggregates.items()},
    }


def write_summary(path, result: MonteCarloResult, scenario: Scenario, manifest: dict) -> None:
    Path(path).write_text(json.dumps(summary_dict(result, scenario, manifest), indent=2,
                                     default=_json_default) + "\n")


def write_trace(path, runs: dict[str, list[RunSummary]]) -> None:
    """One JSON line per interval with the solver diagnostics."""
    with open(path, "w") as fh:
        for strategy, s in _runs_in_order(runs):
            for r in s.records:
                row = {"strategy": strategy, "run": s.run_index, "n": r.n,
                       "violations": r.violations, **r.diagnostics}
                fh.write(json.dumps(row, default=_json_default) + "\n")


def write_all(out_dir, result: MonteCarloResult, scenario: Scenario, manifest: dict,
              trace: bool = False) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / name for name in
             ("trajectories.csv", "bandwidth.csv", "pcrb.csv", "summary.json")}
    write_trajectories(paths["trajectories.csv"], result.runs)
    write_bandwidth(paths["bandwidth.csv"], result.runs)
    write_pcrb(paths["pcrb.csv"], result.runs)
    write_summary(paths["summary.json"], result, scenario, manifest)
    if trace:
        paths["trace.jsonl"] = out / "trace.jsonl"
        write_trace(paths["trace.jsonl"], result.runs)
    return paths
