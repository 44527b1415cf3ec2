"""Command line entry point: ``rstoda simulate | verify | sweep``.

Exit codes: 0 all checks pass / simulation completed; 1 at least one check
failed; 2 configuration error (including invalid initial states); 3 runtime
failure during integration (partial trajectory output is flushed).

The environment variable ``RSTODA_THREADS`` caps the number of worker
threads used to run independent checks (default 1; results are identical
regardless of the setting because every check owns a named RNG substream).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import checks as checks_mod
from . import dynamics as dyn
from . import flows as fl
from .config import ScenarioConfig, default_config_dict, load_config, parse_config
from .errors import (
    CollisionEncountered,
    CollisionSingularity,
    ConfigError,
    RSTodaError,
    StepUnderflow,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _fmt(value: float) -> str:
    return f"{value:.17e}"


def _trajectory_rows(params, trajectory):
    n = params.n
    header = ["tau_re", "tau_im"]
    for i in range(1, n + 1):
        header += [f"x{i}_re", f"x{i}_im"]
    for i in range(1, n + 1):
        header += [f"p{i}_re", f"p{i}_im"]
    for k in range(1, n + 1):
        header += [f"trL{k}_re", f"trL{k}_im"]
    yield ",".join(header)
    for sample in trajectory.samples:
        row = [_fmt(sample.time.real), _fmt(sample.time.imag)]
        for arr in (sample.state.x, sample.state.p, sample.invariants):
            for value in arr:
                row += [_fmt(value.real), _fmt(value.imag)]
        yield ",".join(row)


def run_simulate(config: ScenarioConfig, out_dir: Path) -> int:
    """Integrate every configured flow and write one CSV per trajectory."""
    out_dir.mkdir(parents=True, exist_ok=True)
    state = config.resolve_state()
    status = EXIT_OK
    for idx, spec in enumerate(config.flows):
        sign = "p" if spec.m > 0 else "n"
        path = out_dir / f"trajectory_{idx:02d}_{sign}{abs(spec.m)}.csv"
        try:
            trajectory = fl.integrate_flow(config.params, state, spec)
        except (CollisionEncountered, StepUnderflow) as exc:
            # flush whatever the exception carries, then report runtime failure
            with open(path, "w") as fh:
                fh.write(f"# integration failed: {exc}\n")
            print(f"flow {idx} (m={spec.m}): FAILED ({exc})", file=sys.stderr)
            status = EXIT_RUNTIME
            continue
        with open(path, "w") as fh:
            for line in _trajectory_rows(config.params, trajectory):
                fh.write(line + "\n")
        print(
            f"flow {idx} (m={spec.m}): {len(trajectory.samples)} samples, "
            f"invariant drift {trajectory.invariant_drift():.3e} -> {path}"
        )
    return status


def run_verify(config: ScenarioConfig, report_path: Path | None) -> int:
    max_workers = max(1, int(os.environ.get("RSTODA_THREADS", "1")))
    report = checks_mod.run_checks(config, max_workers=max_workers)
    for record in sorted(report.records, key=lambda r: r.name):
        verdict = "PASS" if record.passed else "FAIL"
        print(
            f"{verdict} {record.name:<26} residual {record.residual:.3e} "
            f"tol {record.tolerance:.1e} [{record.equation}] ({record.runtime_s:.2f} s)"
        )
    if report_path is not None:
        report_path.parent.mkdir(parents=True, exist_ok=True)
        with open(report_path, "w") as fh:
            json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _apply_axis(data: dict, axis: str, value: str) -> dict:
    out = json.loads(json.dumps(data))  # deep copy
    if axis == "gamma":
        out["params"]["gamma"] = [float(value), 0.0]
    elif axis == "eta":
        out["params"]["eta"] = [float(value), 0.0]
    elif axis == "N":
        out["params"]["n"] = int(value)
        out["state"] = {"mode": "random"}
    elif axis == "duration":
        for fblock in out.get("flows", []):
            fblock["duration"] = [float(value), 0.0]
        for cblock in out.get("checks", []):
            if isinstance(cblock, dict) and cblock.get("name") in (
                "tau-zero-correspondence",
                "commutator-defect",
            ):
                cblock["duration"] = float(value)
    elif axis == "rtol":
        for fblock in out.get("flows", []):
            fblock["rtol"] = float(value)
        for cblock in out.get("checks", []):
            if isinstance(cblock, dict) and cblock.get("name") in (
                "tau-zero-correspondence",
                "commutator-defect",
            ):
                cblock["rtol"] = float(value)
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    return out


def run_sweep(config_data: dict, axis: str, values: list[str], report_path: Path | None) -> int:
    max_workers = max(1, int(os.environ.get("RSTODA_THREADS", "1")))
    rows = []
    status = EXIT_OK
    for value in values:
        cfg = parse_config(_apply_axis(config_data, axis, value))
        report = checks_mod.run_checks(cfg, max_workers=max_workers)
        row = {
            "value": value,
            "overall_pass": report.passed,
            "max_residual": {r.name: r.residual for r in report.records},
            "pass": {r.name: r.passed for r in report.records},
        }
        rows.append(row)
        print(f"{axis} = {value}: {'PASS' if report.passed else 'FAIL'}")
        if not report.passed:
            status = EXIT_CHECK_FAILED
    aggregate = {"axis": axis, "values": values, "rows": rows}
    if report_path is not None:
        report_path.parent.mkdir(parents=True, exist_ok=True)
        with open(report_path, "w") as fh:
            json.dump(aggregate, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rstoda",
        description="Hierarchy flows and determinant tau-function verification harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="integrate configured flows to CSV")
    p_sim.add_argument("--config", required=True, type=Path)
    p_sim.add_argument("--out", required=True, type=Path)

    p_ver = sub.add_parser("verify", help="run configured identity checks")
    p_ver.add_argument("--config", required=True, type=Path)
    p_ver.add_argument("--report", type=Path, default=None)

    p_swp = sub.add_parser("sweep", help="repeat verify along a parameter axis")
    p_swp.add_argument("--config", required=True, type=Path)
    p_swp.add_argument("--axis", required=True, choices=["gamma", "eta", "N", "duration", "rtol"])
    p_swp.add_argument("--values", required=True, help="comma-separated axis values")
    p_swp.add_argument("--report", type=Path, default=None)

    p_cfg = sub.add_parser("default-config", help="print the desk-scale scenario JSON")
    p_cfg.add_argument("--n", type=int, default=3)
    p_cfg.add_argument("--seed", type=int, default=20190731)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "default-config":
            print(json.dumps(default_config_dict(n=args.n, seed=args.seed), indent=2))
            return EXIT_OK
        if args.command == "simulate":
            return run_simulate(load_config(args.config), args.out)
        if args.command == "verify":
            return run_verify(load_config(args.config), args.report)
        if args.command == "sweep":
            with open(args.config) as fh:
                data = json.load(fh)
            values = [v for v in args.values.split(",") if v != ""]
            return run_sweep(data, args.axis, values, args.report)
    except (ConfigError, CollisionSingularity) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"configuration error: invalid JSON: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RSTodaError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
