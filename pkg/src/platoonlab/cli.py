"""Command-line front end: run, verify, sweep, threshold.

Artifacts for one run land in a single directory:

    scenario.cfg      resolved configuration (reproduces the run exactly)
    trajectory.csv    t, vehicle, x, v, u, branch, eps1, eps2, headway
    report.txt        machine-parseable ``key: value`` lines
    checks.csv        id, vehicle, lhs, rhs, margin, passed
    plots/            per-vehicle ``x,v`` and ``x,headway`` series for the
                      selected vehicles (platoon deciles by default)

The output directory is ``--out`` when given, else ``$PLATOON_OUT``, else
``<config stem>_artifacts`` next to the working directory.  All numeric
output uses full round-trip decimal formatting.

Exit codes: 0 success, 1 usage or configuration error, 2 controller
hypothesis violation, 3 bound-check failure (verify), 4 numeric blow-up.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .analysis import (
    AnalysisReport,
    BoundCheck,
    analyze,
    headway_band,
    noncollision_threshold,
)
from .config import parse_scenario_file, serialize_scenario
from .exceptions import BlowUpError, ConfigError, HypothesisError
from .profile import SpeedDropProfile, validate
from .sim import Scenario, Trajectory, run as run_scenario

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_HYPOTHESIS = 2
EXIT_BOUND_FAILURE = 3
EXIT_BLOWUP = 4

# Gates applied by `verify`; the headway band matches the regression
# tolerance used by the acceptance suite.
VERIFY_HEADWAY_BAND = (0.97, 1.05)
VERIFY_END_SPEED_TOL = 0.1


def _fmt(value) -> str:
    """Full round-trip decimal formatting for floats."""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class RunArtifacts:
    """Paths written for one run; every path exists on success."""

    out_dir: Path
    scenario_path: Path
    trajectory_path: Path
    report_path: Path
    checks_path: Path
    plot_paths: tuple[Path, ...]


def default_plot_vehicles(n: int) -> tuple[int, ...]:
    """Decile vehicles (10, 20, ..., 100 for n = 100), always within 1..n."""
    picks = sorted({max(1, round(n * k / 10)) for k in range(1, 11)})
    return tuple(picks)


def write_trajectory_csv(trajectory: Trajectory, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t", "vehicle", "x", "v", "u", "branch", "eps1", "eps2", "headway"]
        )
        for k in range(trajectory.n_samples):
            t = _fmt(float(trajectory.times[k]))
            for j in range(trajectory.n):
                writer.writerow(
                    [
                        t,
                        j + 1,
                        _fmt(float(trajectory.x[k, j])),
                        _fmt(float(trajectory.y[k, j])),
                        _fmt(float(trajectory.u[k, j])),
                        int(trajectory.branch[k, j]),
                        _fmt(float(trajectory.eps1[k, j])),
                        _fmt(float(trajectory.eps2[k, j])),
                        _fmt(float(trajectory.headway[k, j])),
                    ]
                )


def write_plot_csvs(
    trajectory: Trajectory, plot_dir: Path, vehicles: tuple[int, ...]
) -> tuple[Path, ...]:
    plot_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in vehicles:
        col = i - 1
        vel_path = plot_dir / f"velocity_v{i:03d}.csv"
        with open(vel_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "v"])
            for k in range(trajectory.n_samples):
                writer.writerow(
                    [_fmt(float(trajectory.x[k, col])), _fmt(float(trajectory.y[k, col]))]
                )
        head_path = plot_dir / f"headway_v{i:03d}.csv"
        with open(head_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "headway"])
            for k in range(trajectory.n_samples):
                writer.writerow(
                    [
                        _fmt(float(trajectory.x[k, col])),
                        _fmt(float(trajectory.headway[k, col])),
                    ]
                )
        paths.extend([vel_path, head_path])
    return tuple(paths)


def write_checks_csv(checks: tuple[BoundCheck, ...], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "vehicle", "lhs", "rhs", "margin", "passed"])
        for c in checks:
            writer.writerow(
                [
                    c.check_id,
                    "" if c.vehicle is None else c.vehicle,
                    _fmt(c.lhs),
                    _fmt(c.rhs),
                    _fmt(c.margin),
                    c.passed,
                ]
            )


def report_lines(report: AnalysisReport) -> list[str]:
    lines = [
        f"n: {report.n}",
        f"T_s: {_fmt(report.headway)}",
        f"lipschitz_constant_per_s: {_fmt(report.lipschitz_constant)}",
        f"speed_infimum_mps: {_fmt(report.speed_infimum)}",
        f"contraction_factor: {_fmt(report.lipschitz_constant * report.headway)}",
        f"noncollision_threshold_m: {_fmt(report.threshold)}",
        f"flow_veh_per_s: {_fmt(report.flow)}",
        f"density_before_drop_veh_per_m: {_fmt(report.density_before)}",
        f"density_after_drop_veh_per_m: {_fmt(report.density_after)}",
        f"collision_count: {report.collision_count}",
        f"headway_min_s: {_fmt(report.headway_band[0])}",
        f"headway_max_s: {_fmt(report.headway_band[1])}",
        f"worst_end_speed_error_mps: {_fmt(report.worst_end_speed_error)}",
        f"checks_total: {len(report.checks)}",
        f"checks_failed: {len(report.failed_checks)}",
    ]
    for i, fit in enumerate(report.decay_fits, start=1):
        if fit.converged:
            lines.append(f"decay_rate_vehicle_{i}: converged")
        else:
            lines.append(f"decay_rate_vehicle_{i}: {_fmt(fit.rate)}")
            lines.append(f"decay_residual_vehicle_{i}: {_fmt(fit.residual)}")
    return lines


def write_artifacts(
    trajectory: Trajectory,
    out_dir: Path,
    vehicles: tuple[int, ...] | None = None,
) -> tuple[RunArtifacts, AnalysisReport]:
    out_dir.mkdir(parents=True, exist_ok=True)
    if vehicles is None:
        vehicles = default_plot_vehicles(trajectory.n)
    scenario_path = out_dir / "scenario.cfg"
    scenario_path.write_text(
        serialize_scenario(trajectory.scenario), encoding="utf-8"
    )
    trajectory_path = out_dir / "trajectory.csv"
    write_trajectory_csv(trajectory, trajectory_path)
    plot_paths = write_plot_csvs(trajectory, out_dir / "plots", vehicles)
    report = analyze(trajectory)
    report_path = out_dir / "report.txt"
    report_path.write_text("\n".join(report_lines(report)) + "\n", encoding="utf-8")
    checks_path = out_dir / "checks.csv"
    write_checks_csv(report.checks, checks_path)
    return (
        RunArtifacts(
            out_dir=out_dir,
            scenario_path=scenario_path,
            trajectory_path=trajectory_path,
            report_path=report_path,
            checks_path=checks_path,
            plot_paths=plot_paths,
        ),
        report,
    )


def _resolve_out_dir(args_out: str | None, config_path: str) -> Path:
    if args_out:
        return Path(args_out)
    env = os.environ.get("PLATOON_OUT")
    if env:
        return Path(env)
    return Path(f"{Path(config_path).stem}_artifacts")


def _parse_vehicles(raw: str | None) -> tuple[int, ...] | None:
    if raw is None:
        return None
    try:
        return tuple(int(part) for part in raw.split(","))
    except ValueError:
        raise ConfigError(f"--vehicles expects integers, got {raw!r}") from None


def cmd_run(args) -> int:
    scenario = parse_scenario_file(args.config)
    out_dir = _resolve_out_dir(args.out, args.config)
    trajectory = run_scenario(scenario)
    artifacts, _ = write_artifacts(
        trajectory, out_dir, _parse_vehicles(args.vehicles)
    )
    print(f"artifacts written to {artifacts.out_dir}")
    return EXIT_OK


def _verify_failures(trajectory: Trajectory, report: AnalysisReport) -> list[str]:
    failures = []
    if report.collision_count > 0:
        failures.append(f"collision events: {report.collision_count}")
    profile = trajectory.scenario.profile
    if isinstance(profile, SpeedDropProfile):
        band = headway_band(trajectory, x_min=profile.drop_start)
    else:
        band = report.headway_band
    lo, hi = VERIFY_HEADWAY_BAND
    if not (math.isnan(band[0]) or (lo <= band[0] and band[1] <= hi)):
        failures.append(
            f"headway band [{_fmt(band[0])}, {_fmt(band[1])}] outside [{lo}, {hi}]"
        )
    if report.worst_end_speed_error > VERIFY_END_SPEED_TOL:
        failures.append(
            f"end speed error {_fmt(report.worst_end_speed_error)} m/s "
            f"exceeds {VERIFY_END_SPEED_TOL}"
        )
    # gate on the branch-agnostic control ceiling; per-branch margins are
    # recorded in checks.csv either way
    for c in report.checks:
        if c.check_id == "control_bound_overall" and not c.passed:
            failures.append(
                f"control bound exceeded for vehicle {c.vehicle}: "
                f"|u| = {_fmt(c.lhs)} > {_fmt(c.rhs)}"
            )
    return failures


def cmd_verify(args) -> int:
    scenario = parse_scenario_file(args.config)
    out_dir = _resolve_out_dir(args.out, args.config)
    trajectory = run_scenario(scenario)
    artifacts, report = write_artifacts(
        trajectory, out_dir, _parse_vehicles(args.vehicles)
    )
    failures = _verify_failures(trajectory, report)
    print(f"artifacts written to {artifacts.out_dir}")
    band = report.headway_band
    print(f"headway band: [{_fmt(band[0])}, {_fmt(band[1])}] s")
    print(f"collisions: {report.collision_count}")
    print(f"worst end speed error: {_fmt(report.worst_end_speed_error)} m/s")
    if failures:
        for failure in failures:
            print(f"FAIL: {failure}")
        return EXIT_BOUND_FAILURE
    print("all checks passed")
    return EXIT_OK


def cmd_threshold(args) -> int:
    scenario = parse_scenario_file(args.config)
    check = validate(scenario.profile, scenario.T)
    threshold = noncollision_threshold(scenario.profile, scenario.T)
    print(f"noncollision_threshold_m: {_fmt(threshold)}")
    print(f"lipschitz_constant_per_s: {_fmt(check.lipschitz_constant)}")
    print(f"speed_infimum_mps: {_fmt(check.infimum)}")
    print(f"speed_supremum_mps: {_fmt(scenario.profile.supremum())}")
    print(f"contraction_factor: {_fmt(check.contraction_factor)}")
    return EXIT_OK


_SWEEPABLE = {
    "profile.v0": float,
    "profile.rho": float,
    "profile.drop_start": float,
    "profile.drop_length": float,
    "platoon.n": int,
    "platoon.T": float,
    "sim.x1_start": float,
    "sim.duration": float,
    "sim.dt": float,
    "sim.record_interval": float,
    "sim.saturation": float,
}


def _apply_override(scenario: Scenario, param: str, value) -> Scenario:
    section, _, key = param.partition(".")
    if section == "profile":
        new_profile = replace(scenario.profile, **{key: value})
        return replace(scenario, profile=new_profile)
    if section == "platoon":
        field = {"n": "n", "T": "T"}[key]
        return replace(scenario, **{field: value})
    return replace(scenario, **{key: value})


def _sweep_worker(payload) -> tuple[str, int, str]:
    config_path, param, raw_value, out_dir = payload
    label = f"{param.replace('.', '_')}_{raw_value}"
    try:
        scenario = parse_scenario_file(config_path)
        value = _SWEEPABLE[param](raw_value)
        scenario = _apply_override(scenario, param, value)
        check = validate(scenario.profile, scenario.T)
        if not check.ok:
            raise HypothesisError("; ".join(check.failures))
        trajectory = run_scenario(scenario)
        write_artifacts(trajectory, Path(out_dir) / label)
        return label, EXIT_OK, "ok"
    except HypothesisError as exc:
        return label, EXIT_HYPOTHESIS, str(exc)
    except BlowUpError as exc:
        return label, EXIT_BLOWUP, str(exc)
    except (ConfigError, ValueError, KeyError) as exc:
        return label, EXIT_USAGE, str(exc)


def cmd_sweep(args) -> int:
    if args.param not in _SWEEPABLE:
        print(
            f"unknown sweep parameter {args.param!r}; choose from "
            + ", ".join(sorted(_SWEEPABLE)),
            file=sys.stderr,
        )
        return EXIT_USAGE
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        print("--values must list at least one value", file=sys.stderr)
        return EXIT_USAGE
    # validate the base config up front so usage errors surface once
    parse_scenario_file(args.config)
    out_dir = _resolve_out_dir(args.out, args.config)
    payloads = [(args.config, args.param, v, str(out_dir)) for v in values]
    workers = min(len(payloads), os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_worker, payloads))
    else:
        results = [_sweep_worker(p) for p in payloads]
    worst = EXIT_OK
    for label, code, message in results:
        status = "ok" if code == EXIT_OK else f"exit {code}: {message}"
        print(f"{label}: {status}")
        worst = max(worst, code)
    return worst


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="platoonlab",
        description="Simulate and verify a switched constant-time-headway "
        "platoon tracking a speed-drop profile.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario and write artifacts")
    p_verify = sub.add_parser(
        "verify", help="run plus the full analysis gate; nonzero exit on failure"
    )
    for p in (p_run, p_verify):
        p.add_argument("config", help="scenario configuration file")
        p.add_argument("--out", help="output directory (default: $PLATOON_OUT)")
        p.add_argument(
            "--vehicles",
            help="comma-separated vehicle indices for plot CSVs "
            "(default: platoon deciles)",
        )

    p_sweep = sub.add_parser(
        "sweep", help="run a scenario once per value of one parameter"
    )
    p_sweep.add_argument("config")
    p_sweep.add_argument("--param", required=True, help="e.g. platoon.T or sim.dt")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--out", help="output directory (default: $PLATOON_OUT)")

    p_threshold = sub.add_parser(
        "threshold", help="print the non-collision threshold and profile constants"
    )
    p_threshold.add_argument("config")

    p_run.set_defaults(func=cmd_run)
    p_verify.set_defaults(func=cmd_verify)
    p_sweep.set_defaults(func=cmd_sweep)
    p_threshold.set_defaults(func=cmd_threshold)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except HypothesisError as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BlowUpError as exc:
        print(f"numeric blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
