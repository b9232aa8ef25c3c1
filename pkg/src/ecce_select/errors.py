"""Exception hierarchy shared by every module."""


class CalibrationError(Exception):
    """Base class for all errors raised by this package."""


class InputError(CalibrationError, ValueError):
    """Invalid observations were supplied."""


class LengthMismatch(InputError):
    pass


class OutOfRangeScore(InputError):
    pass


class InvalidLabel(InputError):
    pass


class Empty(InputError):
    pass


class NotSorted(CalibrationError):
    pass


class OneClassOnly(InputError):
    pass


class TooFewPoints(InputError):
    pass


class TooFewObservations(InputError):
    pass


class NoConverge(CalibrationError):
    pass


class NoUncalibrated(CalibrationError):
    """Selection requires a feasible uncalibrated baseline."""
