from .config import ErrorInjection, SimConfig, build_density, load_config
from .output import emit_heatmap
from .runner import RunResult, SimulationAborted, run_agent_loop, run_pde_loop, run_sweep

__all__ = [
    "ErrorInjection",
    "SimConfig",
    "build_density",
    "load_config",
    "emit_heatmap",
    "RunResult",
    "SimulationAborted",
    "run_agent_loop",
    "run_pde_loop",
    "run_sweep",
]
