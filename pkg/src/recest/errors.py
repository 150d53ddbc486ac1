"""Exception types raised by the toolkit."""


class RecestError(Exception):
    """Base class for all toolkit errors."""


class SingularNormalizer(RecestError):
    """The normalizing matrix cannot be inverted at the current step."""


class NonFiniteStep(RecestError):
    """An update produced NaN or Inf."""


class InvalidAlpha(RecestError, ValueError):
    """Degrees of freedom must be strictly positive."""


class QuadratureFailure(RecestError):
    """Adaptive integration did not reach the requested tolerance."""


class SingularFisher(RecestError):
    """Fisher information is not invertible at the requested parameter."""


class InvalidPhi(RecestError, ValueError):
    """The robust influence function is not odd."""


class NonMonotone(RecestError, ValueError):
    """A sequence required to be nondecreasing decreases."""


class ConfigError(RecestError, ValueError):
    """Experiment configuration failed validation."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)
