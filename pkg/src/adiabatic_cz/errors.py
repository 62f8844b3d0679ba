"""Exception and warning types raised across the package."""


class AdiabaticCZError(Exception):
    """Base class for all package errors."""


class NumericalError(AdiabaticCZError):
    """Base class for failures of a numerical procedure (CLI exit code 3)."""


class ConfigError(AdiabaticCZError):
    """Invalid preset or study configuration (CLI exit code 2)."""


class OutOfRange(NumericalError, ValueError):
    """A requested coupler frequency lies outside the SQUID band."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DimensionOverflow(AdiabaticCZError, ValueError):
    pass


class DiagonalizationError(NumericalError):
    pass


class TrackingAmbiguous(NumericalError):
    """Adiabatic continuation could not be resolved by grid refinement."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class NoSignChange(NumericalError):
    pass


class DegenerateFlat(NumericalError):
    """The conditional rate vanishes identically on the bracket."""


class ConstraintViolation(AdiabaticCZError, ValueError):
    pass


class RangeExceeded(NumericalError):
    pass


class ConvergenceFailure(NumericalError):
    pass


class Unreachable(NumericalError):
    pass


class InsufficientPeaks(NumericalError):
    pass


class FitDegenerate(NumericalError):
    pass


class NonConvergence(NumericalError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SingularJacobian(NumericalError):
    pass


class DegenerateData(NumericalError):
    pass


class InsufficientPhysicalSamples(NumericalError):
    pass


class HighLeakage(UserWarning):
    pass


class NonPhysical(UserWarning):
    pass


class TrackingDegeneracy(UserWarning):
    pass
