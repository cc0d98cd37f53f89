"""Exception types shared across the package.

The CLI maps these onto process exit codes: usage errors exit 2, data
errors exit 3, numerical failures exit 4.
"""


class GraphKfError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(GraphKfError, ValueError):
    """An array argument has the wrong shape, dtype, or non-finite entries."""


class DataFormatError(GraphKfError):
    """An on-disk artifact is missing, unreadable, or fails validation."""


class NumericalError(GraphKfError):
    """A computation produced non-finite values or lost positive definiteness."""


class SingularInnovationError(NumericalError):
    """Cholesky factorization of an innovation/SPD matrix failed.

    Carries the smallest diagonal pivot encountered so the caller can see
    how far from positive definite the matrix was.
    """

    def __init__(self, message, min_pivot):
        super().__init__(f"{message} (min diagonal pivot {min_pivot:.6e})")
        self.min_pivot = float(min_pivot)


class GeneratorInstabilityError(NumericalError):
    """State trajectory blew up during synthetic data generation."""


class UnsupportedNoiseModeError(GraphKfError, ValueError):
    """A noise-entry mode is not available for the given model."""
