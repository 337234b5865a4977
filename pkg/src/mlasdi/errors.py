"""Exception hierarchy shared by every module."""


class MlasdiError(Exception):
    """Base class for all errors raised by the package."""


class DimensionMismatch(MlasdiError, ValueError):
    pass


class RankDeficient(MlasdiError, ValueError):
    pass


class NotPositiveDefinite(MlasdiError, ValueError):
    pass


class InvalidGrid(MlasdiError, ValueError):
    pass


class InvalidTensor(MlasdiError, ValueError):
    pass


class FormatError(MlasdiError, ValueError):
    pass


class ShapeError(MlasdiError, ValueError):
    pass


class NonUniformTimeGrid(MlasdiError, ValueError):
    pass


class TooFewTimesteps(MlasdiError, ValueError):
    pass


class NonFiniteLoss(MlasdiError, ArithmeticError):
    """Training diverged.

    ``iteration`` is the index at which the loss stopped being finite and
    ``stage`` the (0-based) stage index when raised from multistage training.
    """

    def __init__(self, message, iteration=None, stage=None):
        super().__init__(message)
        self.iteration = iteration
        self.stage = stage


class NonFiniteState(MlasdiError, ArithmeticError):
    pass


class ZeroNormSlice(MlasdiError, ValueError):
    pass


class NoSamples(MlasdiError, ValueError):
    pass


class ConfigError(MlasdiError, ValueError):
    pass


class UnknownExport(MlasdiError, ValueError):
    pass
