"""Command line entry point.

    meanfield-swarm agent-run  --config run.yaml --out runs/agents
    meanfield-swarm pde-run    --config run.yaml --override dim=1 --override cells=256
    meanfield-swarm sweep      --config sweep.yaml --out runs/sweep
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .config import load_config
from .runner import SimulationAborted, run_agent_loop, run_pde_loop, run_sweep


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="meanfield-swarm", description="Mean-field swarm density control")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("agent-run", "agent-based closed loop (KDE feedback)"),
        ("pde-run", "macroscopic closed loop on the density"),
        ("sweep", "repeat a loop over a list of parameter values"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, default=None, help="YAML config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument(
            "--override", action="append", default=[], metavar="KEY=VALUE",
            help="dotted config override, may be repeated",
        )
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.out is not None:
        overrides.append(f"output.dir={args.out}")
    try:
        cfg, raw = load_config(args.config, overrides)
        if args.command == "sweep":
            base_dir = args.config.parent if args.config else Path(".")
            rows = run_sweep(raw, base_dir)
            for r in rows:
                print(f"value={r['value']} seed={r['seed']} steady_l2={r['steady_l2']:.6g} final_l2={r['final_l2']:.6g}")
            return 0
        if cfg.output_dir is None:
            cfg = dataclasses.replace(cfg, output_dir=f"runs/{args.command}")
        run = run_agent_loop if args.command == "agent-run" else run_pde_loop
        diag = run(cfg).diagnostics
    except SimulationAborted as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    e = diag.l2_error
    print(f"{args.command}: {len(e)} records, l2_error {e[0]:.6g} -> {e[-1]:.6g}; output in {cfg.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
