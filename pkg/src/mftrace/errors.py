"""Exception and warning classes.

Every error carries an ``exit_code`` used by the command line front end:
2 for bad configuration, 3 for capacity exhaustion, 4 for numerical
non-convergence.
"""


class MftraceError(Exception):
    exit_code = 2


class IfsError(MftraceError, ValueError):
    """Base class for rejected iterated function systems."""


class OverlapError(IfsError):
    pass


class BoundaryError(IfsError):
    pass


class RatioError(IfsError):
    pass


class ZeroGapError(IfsError):
    pass


class WeightError(MftraceError, ValueError):
    pass


class CapacityError(MftraceError):
    exit_code = 3


class EmptyIntervalError(MftraceError, ValueError):
    pass


class NegativeQUnenlargedError(MftraceError, ValueError):
    pass


class InsufficientScalesError(MftraceError, ValueError):
    exit_code = 4


class BracketError(MftraceError):
    exit_code = 4


class TooFewValuesError(MftraceError, ValueError):
    exit_code = 4


class NonConvergedError(MftraceError):
    exit_code = 4


class ZeroMeasureSideError(MftraceError):
    """A one-sided neighbourhood of a gap endpoint carries no mass."""


class ConfigError(MftraceError, ValueError):
    pass


class NonConvexWarning(UserWarning):
    pass


class LacunarityWarning(UserWarning):
    pass
