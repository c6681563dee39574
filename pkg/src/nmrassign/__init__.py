"""Backbone resonance assignment via layered-graph linear programming."""

from .domain import (
    NmrAssignError,
    Peak,
    Prior,
    PriorTable,
    ProteinSequence,
    SpinSystem,
    Tolerances,
)

__version__ = "0.1.0"

__all__ = [
    "NmrAssignError",
    "Peak",
    "Prior",
    "PriorTable",
    "ProteinSequence",
    "SpinSystem",
    "Tolerances",
    "__version__",
]
