"""Exception types raised across the package."""


class HardEdgeError(Exception):
    """Base class for all package errors."""


class ConfigError(HardEdgeError):
    """Invalid experiment configuration or parameters."""


class NumericalError(HardEdgeError):
    """A numerical routine failed to reach its stated accuracy."""


class StatisticalCheckFailure(HardEdgeError):
    """A statistical verdict (or its control) failed."""


class EmptyPotential(ConfigError):
    pass


class NotUniformlyConvex(ConfigError):
    pass


class OutOfDomain(ConfigError, ValueError):
    pass


class NonPositiveEntry(ConfigError, ValueError):
    pass


class NonPositiveParameter(ConfigError, ValueError):
    pass


class WrongPotential(ConfigError):
    pass


class IndexOutOfBulk(ConfigError, IndexError):
    pass


class TooLarge(ConfigError):
    pass


class DoubleRescale(HardEdgeError):
    pass


class InsufficientReplicas(ConfigError):
    pass


class QuadratureFailure(NumericalError):
    pass


class LineSearchStall(NumericalError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NonConvergence(NumericalError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NoConvergence(NumericalError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class NonFinite(NumericalError):
    pass


class AdaptationFailure(NumericalError):
    pass


class GridTooCoarse(NumericalError):
    pass
