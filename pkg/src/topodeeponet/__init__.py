"""Topological DeepONets: operator learning between measurement spaces via continuous functionals."""

from .deeponet import BranchNetwork, TopologicalDeepONet, TrunkNetwork, evaluate, evaluate_field, sup_error
from .errors import (
    ConfigError,
    CoverError,
    OracleError,
    OutOfDomainError,
    RejectedInputError,
    SpaceMismatchError,
    TopoDeepONetError,
)
from .ridge1d import Activation, approx_exp, fit_ridge_1d
from .spaces import CompactFamily, DualFunctional, MeasurementSpace, SpaceElement, sample_family
from .toponet import FunctionalLayer, TopoNetwork, forward, forward_batch

__version__ = "0.1.0"

__all__ = [
    "BranchNetwork",
    "TopologicalDeepONet",
    "TrunkNetwork",
    "evaluate",
    "evaluate_field",
    "sup_error",
    "ConfigError",
    "CoverError",
    "OracleError",
    "OutOfDomainError",
    "RejectedInputError",
    "SpaceMismatchError",
    "TopoDeepONetError",
    "Activation",
    "approx_exp",
    "fit_ridge_1d",
    "CompactFamily",
    "DualFunctional",
    "MeasurementSpace",
    "SpaceElement",
    "sample_family",
    "FunctionalLayer",
    "TopoNetwork",
    "forward",
    "forward_batch",
]
