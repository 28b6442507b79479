"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end:
2 for bad input, 3 for numerical failures, 4 for oracle mismatches.
"""


class FiltlabError(Exception):
    exit_code = 3


class InputError(FiltlabError, ValueError):
    exit_code = 2


class NumericError(FiltlabError, ArithmeticError):
    exit_code = 3


# model
class NonStochasticRow(InputError):
    pass


class ShapeMismatch(InputError):
    pass


class EmptyLevel(InputError):
    pass


class HorizonExceeded(InputError):
    pass


class ZeroMassState(InputError):
    pass


class BadSchedule(InputError):
    pass


# transport
class DimensionMismatch(InputError):
    pass


class NotNormalized(NumericError):
    pass


class TooLarge(InputError):
    pass


# iteration
class WindowTooLarge(InputError):
    pass


class LevelMissing(InputError):
    pass


# trees
class HeightMismatch(InputError):
    pass


class LevelTooSmall(InputError):
    pass


class SemanticsNotApplicable(InputError):
    pass


class NoCoupling(FiltlabError):
    """No coupling of the requested class exists between two trees."""


# shadow
class EmptySample(InputError):
    pass


class OracleMismatch(FiltlabError):
    exit_code = 4
