"""Parity-structured Quantum-Volume circuits, noisy simulation and closed-form decay laws."""
from .errors import (
    ConfigError, ExtractionUndefinedError, FitError, NumericalError, ParityQVError,
    ParseError, ResourceLimitError, UnitarityError, UnsupportedEstimationError,
)
from .randmat import RngStream

__all__ = [
    "ConfigError", "ExtractionUndefinedError", "FitError", "NumericalError", "ParityQVError",
    "ParseError", "ResourceLimitError", "UnitarityError", "UnsupportedEstimationError", "RngStream",
]
__version__ = "0.1.0"
