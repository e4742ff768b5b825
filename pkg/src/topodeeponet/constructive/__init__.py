"""Constructive approximants: universal networks, covers, separable expansions and sensors."""

from .cover import Cover, cover_image, partition_of_unity, partition_weights
from .sensors import SensorDiscretization, discretize_functional, error_table, sensor_rule
from .separable import SeparableExpansion, SeparableReport, build_separable_approximant, expansion_to_deeponet
from .universal import UniversalFit, build_universal_approximant, fit_universal, split_outputs

__all__ = [
    "Cover",
    "cover_image",
    "partition_of_unity",
    "partition_weights",
    "SensorDiscretization",
    "discretize_functional",
    "error_table",
    "sensor_rule",
    "SeparableExpansion",
    "SeparableReport",
    "build_separable_approximant",
    "expansion_to_deeponet",
    "UniversalFit",
    "build_universal_approximant",
    "fit_universal",
    "split_outputs",
]
