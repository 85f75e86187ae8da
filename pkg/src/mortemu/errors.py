"""Exception hierarchy shared by all modules."""


class MortemuError(Exception):
    """Base class for package errors."""


class ConfigError(MortemuError, ValueError):
    """Malformed or inconsistent configuration."""


class NumericalError(MortemuError, ArithmeticError):
    """A numerical routine could not produce a trustworthy result."""


class NotPositiveDefiniteError(NumericalError):
    """Cholesky factorization failed even after jitter escalation."""


class SingularMatrixError(NumericalError):
    """Triangular factor has a zero on its diagonal."""


class DegenerateFitError(NumericalError):
    """A regression or refit has no unique solution."""


class DegenerateBasisError(DegenerateFitError):
    """Trend basis matrix is rank deficient."""


class DegenerateDesignError(DegenerateFitError):
    """Design sites are affinely dependent."""


class UnsupportedDimensionError(MortemuError, ValueError):
    """Requested dimension is not supported by the routine."""


class SingularFormulaError(NumericalError):
    """A closed-form expression is undefined at the given parameters."""
