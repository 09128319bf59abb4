"""Exception hierarchy shared by all modules."""


class SRNError(Exception):
    """Base class for every error raised by srnkit."""


class ExpressionError(SRNError):
    """Malformed expression, unknown identifier, type mismatch or division by zero."""


class NetError(SRNError):
    """The net violates a structural invariant."""


class FiringError(SRNError):
    """Attempt to fire a transition that is not enabled."""


class RateError(SRNError):
    """A timed transition evaluated to a non-positive or non-finite rate."""


class StateSpaceError(SRNError):
    """Exploration exceeded its state budget."""


class VanishingLoopError(SRNError):
    """Probability mass trapped among vanishing markings."""


class ReducibleChainError(SRNError):
    """The chain has more than one recurrent class."""


class ConvergenceError(SRNError):
    """An iterative solver did not reach the requested residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ParameterError(SRNError):
    """Invalid model parameter."""


class ModelSyntaxError(SRNError):
    """Model file could not be parsed; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)
