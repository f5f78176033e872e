"""Command-line interface: scenario loading, experiment orchestration,
deterministic result files.

Every output file embeds the seed and the sha256 of the resolved
configuration; re-running a subcommand with the same seed reproduces
the files byte for byte. Exit codes: 0 success, 2 configuration or
usage error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .protocols import (
    ExperimentOutput,
    budget_report,
    coherence_experiment,
    local_gate_experiment,
    modular_3q_experiment,
    phase_scan_experiment,
    remote_bell_experiment,
    timing_report,
)
from .scenario import Scenario, ScenarioError, load_scenario, loads_scenario

SUBCOMMANDS = (
    "remote-bell",
    "phase-scan",
    "coherence",
    "local-gate",
    "modular-3q",
    "budget",
    "timing",
)


def _fmt_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _header(subcommand: str, seed: int, config_hash: str) -> list[str]:
    return [
        f"# ionnet {subcommand}",
        f"# seed = {seed}",
        f"# config_sha256 = {config_hash}",
    ]


def write_outputs(
    out_dir: Path,
    subcommand: str,
    scenario: Scenario,
    seed: int,
    output: ExperimentOutput,
) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    config_hash = scenario.config_hash()
    written = []

    config_path = out_dir / "resolved_config.cfg"
    config_path.write_text(scenario.resolved_text(), encoding="utf-8")
    written.append(config_path)

    for name, (columns, rows) in output.tables.items():
        path = out_dir / f"{name}.csv"
        lines = _header(subcommand, seed, config_hash)
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(_fmt_value(v) for v in row))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)

    summary_path = out_dir / "summary.txt"
    lines = _header(subcommand, seed, config_hash)
    for key in output.summary:
        lines.append(f"{key} = {_fmt_value(output.summary[key])}")
    if scenario.defaulted:
        lines.append(f"defaulted_fields = {len(scenario.defaulted)}")
    for warning in scenario.warnings:
        lines.append(f"# warning: {warning}")
    summary_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(summary_path)
    return written


def run_subcommand(
    subcommand: str, scenario: Scenario, seed: int, trials: int, shots: int
) -> ExperimentOutput:
    if subcommand == "budget":
        return budget_report(scenario)
    if subcommand == "timing":
        return timing_report(scenario)
    if subcommand == "remote-bell":
        return remote_bell_experiment(scenario, trials, seed)
    if subcommand == "phase-scan":
        return phase_scan_experiment(scenario, seed, shots)
    if subcommand == "coherence":
        return coherence_experiment(scenario, seed, trials, shots)
    if subcommand == "local-gate":
        return local_gate_experiment(scenario, seed, shots)
    if subcommand == "modular-3q":
        return modular_3q_experiment(scenario, trials, seed, shots)
    raise ScenarioError(f"unknown subcommand {subcommand!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ionnet",
        description="Simulator of a two-module trapped-ion network with "
        "photonic and phonon entanglement buses.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", type=str, default=None, help="scenario file (defaults apply when omitted)")
        p.add_argument("--out", type=str, required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="root seed (overrides [run] seed)")
        p.add_argument("--trials", type=int, default=None, help="override [run] n_trials")
        p.add_argument("--shots", type=int, default=None, help="override [run] shots_per_point")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config is None:
            scenario = loads_scenario("", source="<defaults>")
        else:
            scenario = load_scenario(args.config)
        seed = args.seed if args.seed is not None else scenario.run.seed
        if seed < 0:
            raise ScenarioError("seed must be non-negative")
        trials = args.trials if args.trials is not None else scenario.run.n_trials
        shots = args.shots if args.shots is not None else scenario.run.shots_per_point
        if trials < 1 or shots < 1:
            raise ScenarioError("trials and shots must be at least 1")
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    for warning in scenario.warnings:
        print(f"warning: {warning}", file=sys.stderr)

    try:
        output = run_subcommand(args.subcommand, scenario, seed, trials, shots)
        written = write_outputs(Path(args.out), args.subcommand, scenario, seed, output)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3

    for key, value in output.summary.items():
        print(f"{key} = {_fmt_value(value)}")
    for path in written:
        print(f"wrote {path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
