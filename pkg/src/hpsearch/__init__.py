"""Parallel hyperparameter search over black-box objectives.

Explicit, random and Gaussian-process Bayesian-optimization strategies,
scheduled asynchronously across a worker pool, with an append-only trial
store and SVG figure generation.
"""

from .acquisition import AcquisitionConfig, expected_improvement, propose
from .config import ExperimentConfig, parse_config
from .engine import WorkerPool, run_experiment
from .plan import build_plan
from .space import (
    ParameterSet,
    ParameterSpec,
    SearchSpace,
    categorical,
    continuous,
    define_space,
    discrete,
    opaque,
    sample_random,
)
from .store import TrialRecord, TrialStore, best_trial, load_experiment
from .targets import TargetSpec

__version__ = "0.1.0"

__all__ = [
    "AcquisitionConfig",
    "ExperimentConfig",
    "ParameterSet",
    "ParameterSpec",
    "SearchSpace",
    "TargetSpec",
    "TrialRecord",
    "TrialStore",
    "WorkerPool",
    "best_trial",
    "build_plan",
    "categorical",
    "continuous",
    "define_space",
    "discrete",
    "expected_improvement",
    "load_experiment",
    "opaque",
    "parse_config",
    "propose",
    "run_experiment",
    "sample_random",
]
