"""Exception hierarchy shared by every bglsim module."""


class BglSimError(Exception):
    """Base class for all errors raised by bglsim."""


class ParameterError(BglSimError, ValueError):
    """A model or policy parameter is outside its domain."""


class InfeasibleRateError(BglSimError, ValueError):
    """A positive rate was scheduled on a subcarrier with zero gain."""


class FeasibilityError(BglSimError, ValueError):
    """An action violates the queue or battery budget of its state."""


class OutageError(BglSimError):
    """Every subcarrier has zero gain in this period."""


class ConfigError(BglSimError, ValueError):
    """A configuration file or override could not be resolved."""


class InstanceTooLargeError(BglSimError):
    """A brute-force search would exceed its enumeration budget."""


class InfeasibleDelayError(BglSimError):
    """No swept tradeoff weight meets the requested delay bound."""
