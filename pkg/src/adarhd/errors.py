"""Exception hierarchy shared by the whole package."""


class AdaRHDError(Exception):
    """Base class for all package errors."""


class ContractError(AdaRHDError, ValueError):
    """A caller broke an interface precondition (e.g. mismatched base points)."""


class DomainError(AdaRHDError, ValueError):
    """Input lies outside the domain where a map is defined."""


class DegenerateInputError(AdaRHDError, ValueError):
    """Numerically degenerate input (failed eigendecomposition, rank loss)."""


class ToleranceError(AdaRHDError, ValueError):
    """A numerical tolerance or step is outside the usable range."""


class IndefiniteError(AdaRHDError, ArithmeticError):
    """Conjugate gradient met a direction of non-positive curvature."""


class UnsupportedOperation(AdaRHDError, NotImplementedError):
    """The problem instance does not provide the requested oracle."""


class ConfigError(AdaRHDError, ValueError):
    """Invalid solver or experiment configuration."""


class DivergenceError(AdaRHDError, RuntimeError):
    """A run produced non-finite or exploding values.

    The partial trace recorded up to the failure is attached as ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
