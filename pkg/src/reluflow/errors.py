"""Exception hierarchy shared by every module of the package."""


class ReluFlowError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(ReluFlowError, ValueError):
    """Raised when layer widths, input dimensions or output dimensions disagree."""


class ParseError(ReluFlowError, ValueError):
    """Raised when a serialized network cannot be read.

    The ``offset`` attribute holds the 1-based line number of the offending line.
    """

    def __init__(self, message, offset=None):
        self.offset = offset
        where = f" (line {offset})" if offset is not None else ""
        super().__init__(message + where)


class ConfigError(ReluFlowError, ValueError):
    """Raised for invalid tolerances, domains, metadata or configuration files."""


class BuildTooLarge(ConfigError):
    """Raised when a requested construction would exceed the configured size limit."""


class StiffnessError(ReluFlowError, RuntimeError):
    """Raised by the integrator when the step size collapses.

    Attributes
    ----------
    state : numpy.ndarray
        Last accepted state of the batch.
    sigma : float
        Rescaled time at which integration stopped.
    """

    def __init__(self, message, state=None, sigma=None):
        self.state = state
        self.sigma = sigma
        super().__init__(message)


class DegenerateSweep(ReluFlowError, ValueError):
    """Raised when a scaling fit has too few or degenerate data points."""


class CapabilityError(ReluFlowError, ValueError):
    """Raised when a problem lacks a field that the requested operation needs."""
