"""Diffusion-model warm starts for depth-3 QAOA on unweighted Max-Cut."""

from diffqaoa.errors import (
    CapacityError,
    DatasetError,
    InvariantError,
    ParameterError,
    PersistenceError,
    TrainingDivergedError,
    VersionError,
)
from diffqaoa.graph import CutResult, Graph, brute_force_maxcut, cut_value, generate_random_graph

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "CutResult",
    "DatasetError",
    "Graph",
    "InvariantError",
    "ParameterError",
    "PersistenceError",
    "TrainingDivergedError",
    "VersionError",
    "brute_force_maxcut",
    "cut_value",
    "generate_random_graph",
]
