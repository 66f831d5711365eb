"""Differentially private contextual kernel bandits.

The package implements a projected kernel-ridge estimator that can be
privatized under joint or local differential privacy, an explore-then-eliminate
bandit loop built on it, and a seeded simulation harness.
"""

from .elimination import ActiveSets, RegretLog, RunConfig, run, run_uniform, seed_streams
from .environment import Instance, load_instance, make_instance, save_instance
from .errors import (
    CapriError,
    ConfigError,
    DegenerateReward,
    InvalidArgument,
    InvalidMatrix,
    NotPSD,
    Unsupported,
)
from .kernels import KernelSpec, Point, PointSet
from .private_estimator import JDP, LDP, NONPRIVATE, PrivacyParams, PrivateEstimator, ProjectionPair

__version__ = "0.1.0"
