"""Exception hierarchy.

``DataError`` subclasses signal bad input, ``NumericalError`` subclasses signal
a solver that could not proceed. The CLI maps them to distinct exit codes.
"""


class LocalizationError(Exception):
    pass


class DataError(LocalizationError, ValueError):
    pass


class NumericalError(LocalizationError, ArithmeticError):
    pass


class InvalidDistance(DataError):
    pass


class InvalidAnchor(DataError):
    pass


class UnknownNode(DataError, KeyError):
    pass


class MissingMeasurement(DataError, KeyError):
    pass


class NoNeighbors(DataError):
    pass


class DegenerateFit(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass


class NearSingular(NumericalError):
    pass


class NoBracket(NumericalError):
    pass
