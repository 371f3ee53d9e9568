"""Command-line entry point: ``molqed <subcommand> [--config PATH] [--out DIR]``.

Exit codes: 0 on success, 2 when a physics outcome makes the scenario
unusable (for example the surface attraction destroys the trap), 1 on any
other error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, ScenarioConfig, load_config_text, parse_config, set_key
from .report import SUBCOMMANDS, PhysicsEscalation, ScenarioError, run_scenario

__all__ = ["main", "parse_sweep", "sweep_values"]


def parse_sweep(spec: str) -> tuple[str, float, float, int]:
    """Split ``KEY=start:stop:N``."""
    try:
        key, rng = spec.split("=", 1)
        start, stop, n = rng.split(":")
        n = int(n)
        start, stop = float(start), float(stop)
    except ValueError:
        raise ConfigError(f"--sweep expects KEY=start:stop:N, got {spec!r}") from None
    if n < 1:
        raise ConfigError("--sweep needs N >= 1")
    return key.strip(), start, stop, n


def sweep_values(cfg: ScenarioConfig, key: str, start: float, stop: float, n: int) -> list[ScenarioConfig]:
    vals = np.linspace(start, stop, n)
    out = []
    for v in vals:
        try:
            out.append(set_key(cfg, key, float(v)))
        except ConfigError:
            # integer keys (grid sizes, truncations) need whole numbers
            if float(v).is_integer():
                out.append(set_key(cfg, key, int(v)))
            else:
                raise
    return out


def _threads() -> int:
    raw = os.environ.get("MOLQED_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"MOLQED_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("MOLQED_THREADS must be >= 1")
    return n


def _run_sweep(cfg: ScenarioConfig, sub: str, out: Path, fmt: str, spec: str) -> int:
    key, start, stop, n = parse_sweep(spec)
    cfgs = sweep_values(cfg, key, start, stop, n)
    dirs = [out / f"point_{i:03d}" for i in range(n)]

    def one(i):
        try:
            return "ok", run_scenario(cfgs[i], sub, dirs[i], fmt)
        except PhysicsEscalation as exc:
            return "escalated", str(exc)

    with ThreadPoolExecutor(max_workers=min(n, _threads())) as pool:
        results = list(pool.map(one, range(n)))

    keys, units = [], {}
    for status, rep in results:
        if status == "ok":
            for s, entries in rep.sections.items():
                for e in entries:
                    name = f"{s}.{e.key}"
                    if name not in units:
                        keys.append(name)
                        units[name] = e.unit
    vals = np.linspace(start, stop, n)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([key, "status"] + keys)
        w.writerow(["", ""] + [units[k] for k in keys])
        for v, (status, rep) in zip(vals, results):
            row = rep.scalars() if status == "ok" else {}
            w.writerow([f"{v:.17e}", status] + [f"{row[k]:.17e}" if k in row else "" for k in keys])
    escalated = [i for i, (s, _) in enumerate(results) if s != "ok"]
    for i in escalated:
        print(f"molqed: point {i}: {results[i][1]}", file=sys.stderr)
    return 2 if escalated else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="molqed", description="Design calculations for polar molecules "
                                "trapped above a superconducting stripline resonator.")
    p.add_argument("subcommand", choices=list(SUBCOMMANDS))
    p.add_argument("--config", type=Path, help="YAML scenario file (defaults: CaBr reference point)")
    p.add_argument("--out", type=Path, default=Path("molqed_out"), help="output directory")
    p.add_argument("--sweep", metavar="KEY=start:stop:N", help="scan a numeric config key, e.g. trap.voltage_V=0.05:0.2:4")
    p.add_argument("--format", choices=["report", "csv"], default="report", help="report as text or CSV")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config) if args.config else load_config_text("")
        if args.sweep:
            code = _run_sweep(cfg, args.subcommand, args.out, args.format, args.sweep)
        else:
            run_scenario(cfg, args.subcommand, args.out, args.format)
            code = 0
    except PhysicsEscalation as exc:
        print(f"molqed: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ScenarioError, OSError, ValueError) as exc:
        print(f"molqed: {exc}", file=sys.stderr)
        return 1
    if code == 0:
        print(f"molqed: wrote {args.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
