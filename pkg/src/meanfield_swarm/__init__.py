"""Mean-field feedback control of robot swarms toward a target density."""

from .control import ControlConfig, velocity_from_estimate, velocity_from_true_density
from .fokker_planck import FpScheme, closed_loop_step, fp_step
from .grid import Grid, ScalarField, VectorField, divergence, gradient, integrate, interpolate, laplacian
from .kde import DensityEstimate, KdeConfig, estimate_density, estimation_error
from .metrics import Diagnostics, IssBoundConfig, d_functional, fit_decay_rate, l2_error, liss_condition_margin
from .sde import SwarmState, sample_initial, step

__version__ = "0.1.0"
