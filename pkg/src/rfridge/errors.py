"""Exception hierarchy shared by every module."""


class RFRidgeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(RFRidgeError, ValueError):
    """Invalid feature-map, experiment, or CLI configuration."""


class DomainError(RFRidgeError, ValueError):
    """An input lies outside the domain of the operation."""


class CapabilityError(RFRidgeError, NotImplementedError):
    """The requested operation is not available for this feature family."""


class DegenerateDistributionError(RFRidgeError, ValueError):
    """A sampling distribution has no mass (e.g. all leverage scores zero)."""


class NumericalError(RFRidgeError, ArithmeticError):
    """A factorization failed even after diagonal jitter escalation."""

    def __init__(self, message, jitters=()):
        super().__init__(message)
        self.jitters = tuple(jitters)


class SaturationError(RFRidgeError):
    """The minimal feature-count search hit its upper bound without success."""
