"""Exception types raised across the package."""


class QEHError(Exception):
    """Base class for every error raised by qeh."""


class InvariantError(QEHError, ValueError):
    """A value violates a type invariant; carries the measured residual."""

    def __init__(self, invariant, residual, tolerance=None):
        self.invariant = invariant
        self.residual = float(residual)
        self.tolerance = tolerance
        msg = f"{invariant} violated (residual {self.residual:.3e}"
        if tolerance is not None:
            msg += f", tolerance {tolerance:.1e}"
        super().__init__(msg + ")")


class NotHermitian(InvariantError):
    pass


class NotPositive(InvariantError):
    pass


class BadTrace(InvariantError):
    pass


class NotUnitary(InvariantError):
    pass


class DimMismatch(QEHError, ValueError):
    pass


class ConvergenceFailure(QEHError, RuntimeError):
    pass


class DegenerateSpectrum(QEHError):
    """Raised (or attached to results) when a spectrum has coincident levels.

    ``pairs`` lists the offending index pairs.
    """

    def __init__(self, message, pairs=()):
        self.pairs = list(pairs)
        super().__init__(message)


class UnsupportedCombination(QEHError, TypeError):
    pass


class InsufficientSets(QEHError, ValueError):
    pass


class ResolutionMismatch(QEHError, ValueError):
    pass


class EmptyProduct(QEHError, ValueError):
    pass


class InvalidSpec(QEHError, ValueError):
    pass


class NonIntegrableProfile(QEHError, ValueError):
    pass


class EvenDimension(QEHError, ValueError):
    pass


class ConfigError(QEHError, ValueError):
    """Bad experiment configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class ExperimentError(QEHError):
    """A module error raised while running an experiment; ``context`` names the job."""

    def __init__(self, context, cause):
        self.context = context
        self.cause = cause
        super().__init__(f"{context}: {type(cause).__name__}: {cause}")
