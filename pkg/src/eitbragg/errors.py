"""Exception hierarchy shared by all modules."""


class EitBraggError(Exception):
    """Base class for every error raised by the package."""


class NumericalError(EitBraggError):
    """A computation could not produce a trustworthy number (CLI exit code 3)."""


class ConfigInvalid(EitBraggError):
    """Scenario configuration failed validation (CLI exit code 2)."""


class DenominatorUnderflow(NumericalError):
    pass


class NonPositiveLength(EitBraggError, ValueError):
    pass


class GeometryInfeasible(EitBraggError, ValueError):
    pass


class MatrixOverflow(NumericalError):
    pass


class NonConvergent(NumericalError):
    pass


class BranchAmbiguity(NumericalError):
    pass


class NoGapDetected(NumericalError):
    pass


class DerivativeNonConvergent(NumericalError):
    pass


class InvalidSolitonRegime(EitBraggError, ValueError):
    pass


class InsideGap(EitBraggError, ValueError):
    pass


class CflViolation(EitBraggError, ValueError):
    pass


class NonFiniteField(NumericalError):
    pass
