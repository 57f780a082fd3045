"""Adversarial robustness of quantum classifiers: simulation, attacks and bounds."""

from .core import (
    DensityMatrix,
    DimensionMismatch,
    InvalidQuantumObject,
    NumericalFailure,
    Observable,
    PureState,
    QuantumChannel,
    UnitaryOperator,
    fidelity,
    hs_distance,
    trace_distance,
)
from .sampling import PerturbationSpec, RngStream

__version__ = "0.1.0"

__all__ = [
    "DensityMatrix",
    "DimensionMismatch",
    "InvalidQuantumObject",
    "NumericalFailure",
    "Observable",
    "PerturbationSpec",
    "PureState",
    "QuantumChannel",
    "RngStream",
    "UnitaryOperator",
    "fidelity",
    "hs_distance",
    "trace_distance",
    "__version__",
]
