"""Exception types raised across the package."""


class VgmmTrajError(Exception):
    """Base class for every error raised by vgmmtraj."""


class InvalidTrajectory(VgmmTrajError, ValueError):
    pass


class NonMonotonicTimestamps(InvalidTrajectory):
    pass


class MixedObjectIds(InvalidTrajectory):
    pass


class EmptyTrajectory(InvalidTrajectory):
    pass


class EmptyInput(VgmmTrajError, ValueError):
    pass


class LengthMismatch(VgmmTrajError, ValueError):
    pass


class KTooLarge(VgmmTrajError, ValueError):
    pass


class AllPointsNoise(VgmmTrajError):
    pass


class NoSegments(VgmmTrajError):
    pass


class NumericalFailure(VgmmTrajError, ArithmeticError):
    pass


class DofNotPositive(NumericalFailure):
    pass


class InsufficientHistory(VgmmTrajError, ValueError):
    pass


class AllFitsFailed(VgmmTrajError):
    pass


class NoTestCases(VgmmTrajError):
    pass


class ModelParseError(VgmmTrajError, ValueError):
    pass
