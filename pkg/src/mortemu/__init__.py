"""Annuity valuation under stochastic mortality with nested Monte Carlo,
closed-form estimators and statistical emulators."""

from .errors import (
    ConfigError,
    DegenerateBasisError,
    DegenerateDesignError,
    DegenerateFitError,
    MortemuError,
    NotPositiveDefiniteError,
    NumericalError,
    SingularFormulaError,
    SingularMatrixError,
    UnsupportedDimensionError,
)
from .numcore import RngStream

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateBasisError",
    "DegenerateDesignError",
    "DegenerateFitError",
    "MortemuError",
    "NotPositiveDefiniteError",
    "NumericalError",
    "RngStream",
    "SingularFormulaError",
    "SingularMatrixError",
    "UnsupportedDimensionError",
    "__version__",
]
