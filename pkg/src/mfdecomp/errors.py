"""Exception hierarchy shared by every module."""


class MfError(Exception):
    """Base class for all errors raised by mfdecomp."""


# exact arithmetic
class NotSquareFree(MfError):
    pass


class NoRootInBracket(MfError):
    pass


class MultipleRootsInBracket(MfError):
    pass


class DivisionByZero(MfError, ZeroDivisionError):
    pass


class FieldMismatch(MfError):
    pass


# IFS model
class SingletonAttractor(MfError):
    pass


class InvalidSystem(MfError, ValueError):
    pass


class IndexOutOfRange(MfError, IndexError):
    pass


# subdivision and graph
class UndecidedGap(MfError):
    def __init__(self, message, interval=None, depth_cap=None):
        super().__init__(message)
        self.interval = interval
        self.depth_cap = depth_cap


class RuleViolation(MfError):
    pass


class NeighbourInvariantError(MfError):
    pass


class FncNotDetected(MfError):
    def __init__(self, message, frontier_size=0, vertex_count=0):
        super().__init__(message)
        self.frontier_size = frontier_size
        self.vertex_count = vertex_count


class SingularMassSystem(MfError):
    pass


class NonUniqueMass(MfError):
    def __init__(self, message, nullity=0):
        super().__init__(message)
        self.nullity = nullity


class NotRooted(MfError):
    pass


# spectra
class PathExplosion(MfError):
    def __init__(self, message, threshold=None, count=0):
        super().__init__(message)
        self.threshold = threshold
        self.count = count


class BisectionFailure(MfError):
    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class NonConcaveInput(MfError):
    pass


class GridTooNarrow(MfError):
    pass


# configuration
class ParseError(MfError):
    pass


class ValidationError(MfError):
    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class UnknownExample(MfError):
    pass


class ConstraintViolation(MfError):
    pass
