"""Unmixing noisy marked Hawkes processes on a discrete grid."""
from .errors import ConfigError, DataError, DivergenceError, UnhapError
from .estimator import (MixtureAssignment, ModelParams, grad_rho, loss_hard, loss_meanfield,
                        precompute)
from .evaluation import (MetricsReport, naive_loss_oracle, param_error, rho_precision_recall,
                         test_nll)
from .events import EventSequence, MarkedEvent
from .grid import discretize_events
from .init import InitConfig, moment_match, random_init
from .kernel import RaisedCosineKernel, TruncGaussKernel, make_kernel
from .marks import MarkModel, PiecewiseLinearDensity, builtin_mark_model
from .simulator import SimConfig, simulate_mixture
from .solver import FitResult, SolverConfig, fit, predict_labels

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "DivergenceError", "UnhapError",
    "MixtureAssignment", "ModelParams", "grad_rho", "loss_hard", "loss_meanfield", "precompute",
    "MetricsReport", "naive_loss_oracle", "param_error", "rho_precision_recall", "test_nll",
    "EventSequence", "MarkedEvent", "discretize_events",
    "InitConfig", "moment_match", "random_init",
    "RaisedCosineKernel", "TruncGaussKernel", "make_kernel",
    "MarkModel", "PiecewiseLinearDensity", "builtin_mark_model",
    "SimConfig", "simulate_mixture",
    "FitResult", "SolverConfig", "fit", "predict_labels",
]
