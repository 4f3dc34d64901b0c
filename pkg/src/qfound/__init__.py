"""Operational reconstruction toolkit for finite-dimensional quantum systems."""
from .errors import QFError
from .hilbert import DensityState, HermitianObservable, HilbertSystem, build_hilbert_system, pure_state
from .system import (EventSpec, OperationalSystem, SpectrumSet, conditional_probability, sequential_distribution,
                     sequential_probability)
from .table import TableSystem

__version__ = "0.1.0"

__all__ = [
    "QFError", "DensityState", "HermitianObservable", "HilbertSystem", "build_hilbert_system", "pure_state",
    "EventSpec", "OperationalSystem", "SpectrumSet", "conditional_probability", "sequential_distribution",
    "sequential_probability", "TableSystem", "__version__",
]
