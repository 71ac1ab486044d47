"""Exception hierarchy shared by the solvers and the CLI."""


class StairError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(StairError, ValueError):
    """An input violates a documented invariant."""


class ParseError(StairError):
    def __init__(self, line, message):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


class OutOfDomain(StairError, ValueError):
    pass


class NonmonotoneSolution(StairError):
    pass


class NewtonDivergence(StairError):
    pass


class NoCrossing(StairError):
    pass


class ResolutionTooCoarse(StairError, ValueError):
    pass


class NonConvergence(StairError):
    pass


class MonotonicityViolation(StairError):
    pass


class LevelOutOfRange(StairError, ValueError):
    pass


class DegenerateRegion(StairError, ValueError):
    pass


class PoleProximity(StairError, ValueError):
    pass


class BandOverlap(StairError):
    def __init__(self, message, area=0.0):
        self.area = area
        super().__init__(message)


class EmptyContactSet(StairError):
    pass
