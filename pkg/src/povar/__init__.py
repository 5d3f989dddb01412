"""Simulation and estimation for partially observed sparse VAR(1) processes."""
from __future__ import annotations

__version__ = "0.1.0"

from .covariance import CovarianceEstimate, estimate_covariance, scaling_matrix, true_covariance
from .errors import (ConvergenceError, DegenerateSamplingError, DomainError, EmptyProjectionError,
                     InstabilityError, LPSolverError, PovarError, ScaleError)
from .estimator import EstimateReport, dantzig_estimate, dantzig_row, dense_estimate, tune_lambda
from .experiments import SweepResult, SweepSpec, error_metric, run_sweep, theil_sen
from .model import ModelConfig, TransitionMatrix, gen_sparse_theta, default_config, validate_config
from .simulate import Trajectory, observe, simulate, simulate_sampling, simulate_states
from .theory import (BoundReport, bound_quantities, conditional_covariance, fisher_info_1d,
                     gaussian_kl, kl_bound_check, residual_R)
