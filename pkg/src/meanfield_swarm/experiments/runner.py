"""Simulation loops: agent-based closed loop, macroscopic closed loop, sweeps."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from ..control import ControlConfig, velocity_from_estimate
from ..fokker_planck import CflViolation, closed_loop_fluxes, closed_loop_step
from ..grid import ScalarField, integrate, write_scalar_csv, write_vector_csv
from ..kde import estimate_density
from ..metrics import Diagnostics, d_functional, l2_error
from ..sde import SwarmState, sample_initial, step
from .config import SimConfig, apply_overrides, build_coefficient, build_density
from .output import emit_heatmap, write_positions_csv

__all__ = [
    "RunResult",
    "SimulationAborted",
    "control_config",
    "run_agent_loop",
    "run_pde_loop",
    "run_sweep",
    "steady_state_error",
]

log = logging.getLogger(__name__)


class SimulationAborted(RuntimeError):
    """A field went nonfinite or the solver stalled; the state is dumped if possible."""


@dataclass
class RunResult:
    diagnostics: Diagnostics
    final_density: ScalarField
    final_state: SwarmState | None = None


def control_config(cfg: SimConfig) -> ControlConfig:
    grid = cfg.grid
    target = build_density(cfg.target, grid, cfg.base_dir)
    alpha = build_coefficient(cfg.alpha, grid, cfg.base_dir)
    sigma = build_coefficient(cfg.sigma, grid, cfg.base_dir)
    return ControlConfig(target, alpha, sigma, cfg.velocity_cap)


def _outdir(cfg: SimConfig) -> Path | None:
    if cfg.output_dir is None:
        return None
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _abort(out: Path | None, k: int, t: float, fields: Mapping[str, Any], reason: str = "nonfinite values") -> None:
    msg = f"{reason} at step {k} (t={t:g})"
    if out is not None:
        dump = out / f"abort_step{k:06d}"
        dump.mkdir(exist_ok=True)
        for name, f in fields.items():
            if isinstance(f, ScalarField):
                write_scalar_csv(f, dump / f"{name}.csv")
            elif isinstance(f, np.ndarray):
                write_positions_csv(f, dump / f"{name}.csv")
            else:
                write_vector_csv(f, dump / f"{name}.csv")
        msg += f"; state dumped to {dump}"
    raise SimulationAborted(msg)


def run_agent_loop(cfg: SimConfig) -> RunResult:
    """Estimate -> broadcast velocity -> move agents, once per ``dt``.

    All agents move under the field computed from the estimate at the start
    of the step. The recorded ``l2_error`` compares the estimate with the
    target; ``d`` is NaN because the true density is unknown here.
    """
    grid = cfg.grid
    ctrl = control_config(cfg)
    out = _outdir(cfg)
    if cfg.initial.get("kind", "uniform") == "uniform":
        state = sample_initial(cfg.n_agents, "uniform", cfg.seed, cfg.dim)
    else:
        state = sample_initial(cfg.n_agents, build_density(cfg.initial, grid, cfg.base_dir), cfg.seed)
    if out is not None:
        write_scalar_csv(ctrl.target, out / "target.csv")
        emit_heatmap(ctrl.target, out / "target.pgm")

    diag = Diagnostics()
    n = cfg.n_steps
    for k in range(n + 1):
        t = k * cfg.dt
        est = estimate_density(state.positions, grid, cfg.kde)
        v = velocity_from_estimate(est, ctrl)
        if not (np.all(np.isfinite(est.values)) and all(np.all(np.isfinite(c)) for c in v.components)):
            _abort(out, k, t, {"positions": state.positions, "density": est.field, "velocity": v})
        diag.append(
            t,
            l2_error(est.field, ctrl.target),
            math.nan,
            integrate(est.field),
            float(est.values.min()),
            float(v.magnitude().max()),
        )
        if out is not None and cfg.snapshot_every and k % cfg.snapshot_every == 0:
            write_positions_csv(state.positions, out / f"positions_{k:06d}.csv")
            write_scalar_csv(est.field, out / f"density_{k:06d}.csv")
            write_vector_csv(v, out / f"velocity_{k:06d}.csv")
            emit_heatmap(est.field, out / f"density_{k:06d}.pgm")
        if k == n:
            break
        state = step(state, v, ctrl.sigma, cfg.dt)
    if out is not None:
        diag.to_csv(out / "diagnostics.csv")
    return RunResult(diag, est.field, state)


def run_pde_loop(cfg: SimConfig) -> RunResult:
    """Macroscopic closed loop on the density itself (no agents).

    With ``error_injection`` active the law sees ``p * (1 + eps)`` instead of
    ``p``; ``l2_error`` always measures the true deviation ``||p - p_target||``.
    """
    grid = cfg.grid
    ctrl = control_config(cfg)
    out = _outdir(cfg)
    p = build_density(cfg.initial, grid, cfg.base_dir)
    inj = cfg.error_injection
    eps_field = inj.epsilon(grid)
    d_on = d_functional(eps_field) if inj.mode != "none" else 0.0
    if out is not None:
        write_scalar_csv(ctrl.target, out / "target.csv")
        emit_heatmap(ctrl.target, out / "target.pgm")

    diag = Diagnostics()
    n = cfg.n_steps
    for k in range(n + 1):
        t = k * cfg.dt
        eps = eps_field if inj.active(t) else None
        if not np.all(np.isfinite(p.values)):
            _abort(out, k, t, {"density": p})
        face_v, _ = closed_loop_fluxes(
            p.values, ctrl, cfg.scheme.advection, None if eps is None else eps.values
        )
        speed = max(float(np.max(np.abs(f))) for f in face_v)
        diag.append(
            t,
            l2_error(p, ctrl.target),
            d_on if eps is not None else 0.0,
            integrate(p),
            float(p.values.min()),
            speed,
        )
        if out is not None and cfg.snapshot_every and k % cfg.snapshot_every == 0:
            p_hat = p if eps is None else p.with_values(p.values * (1.0 + eps.values))
            write_scalar_csv(p, out / f"density_{k:06d}.csv")
            write_vector_csv(velocity_from_estimate(p_hat, ctrl), out / f"velocity_{k:06d}.csv")
            emit_heatmap(p, out / f"density_{k:06d}.pgm")
        if k == n:
            break
        try:
            p = closed_loop_step(p, ctrl, cfg.dt, cfg.scheme, eps)
        except (FloatingPointError, CflViolation) as exc:
            _abort(out, k, t, {"density": p}, reason=str(exc))
    if out is not None:
        diag.to_csv(out / "diagnostics.csv")
    return RunResult(diag, p)


def steady_state_error(diag: Diagnostics, t_stop: float | None = None, fraction: float = 0.2) -> float:
    """Mean ``l2_error`` over the last ``fraction`` of ``[0, t_stop]``."""
    t = diag.array("t")
    e = diag.array("l2_error")
    t_stop = t[-1] if t_stop is None else t_stop
    mask = (t >= (1.0 - fraction) * t_stop) & (t < t_stop + 1e-12)
    return float(e[mask].mean())


def run_sweep(raw: Mapping[str, Any], base_dir: str | Path = ".") -> list[dict[str, Any]]:
    """Run one loop per value of a swept parameter.

    ``raw['sweep']`` holds ``parameter`` (dotted config key), ``values``,
    ``loop`` (``pde`` or ``agent``) and optional ``seeds``. Returns one
    summary row per (value, seed); with an output dir each run gets its own
    subdirectory and the rows go to ``sweep_summary.csv``.
    """
    spec = raw.get("sweep")
    if not spec:
        raise ValueError("sweep config needs a 'sweep' section")
    param = spec["parameter"]
    loop = spec.get("loop", "pde")
    if loop not in ("pde", "agent"):
        raise ValueError(f"sweep loop must be 'pde' or 'agent', got {loop!r}")
    base = {k: v for k, v in raw.items() if k != "sweep"}
    base_cfg = SimConfig.from_dict(base, base_dir)
    seeds = spec.get("seeds", [base_cfg.seed])
    root = None if base_cfg.output_dir is None else Path(base_cfg.output_dir)

    rows = []
    for value in spec["values"]:
        for seed in seeds:
            d = apply_overrides(base, [f"{param}={value!r}", f"seed={seed}"])
            cfg = SimConfig.from_dict(d, base_dir)
            if root is not None:
                cfg = dataclasses.replace(cfg, output_dir=str(root / f"{param}={value}_seed{seed}"))
            log.info("sweep %s=%s seed=%s", param, value, seed)
            result = run_pde_loop(cfg) if loop == "pde" else run_agent_loop(cfg)
            diag = result.diagnostics
            t_stop = cfg.error_injection.t_off if cfg.error_injection.mode != "none" else None
            e = diag.array("l2_error")
            rows.append(
                {
                    "value": value,
                    "seed": seed,
                    "initial_l2": float(e[0]),
                    "final_l2": float(e[-1]),
                    "steady_l2": steady_state_error(diag, t_stop),
                    "max_l2": float(e.max()),
                    "d": float(np.nanmax(diag.array("d"))) if loop == "pde" else math.nan,
                    "diagnostics": diag,
                }
            )
    if root is not None:
        root.mkdir(parents=True, exist_ok=True)
        cols = ["value", "seed", "initial_l2", "final_l2", "steady_l2", "max_l2", "d"]
        lines = [",".join(cols)] + [",".join(repr(r[c]) for c in cols) for r in rows]
        (root / "sweep_summary.csv").write_text("\n".join(lines) + "\n")
    return rows
