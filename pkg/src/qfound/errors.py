"""Exception hierarchy shared by every module of the toolkit."""


class QFError(Exception):
    """Base class for all toolkit errors."""


# numerical kernel
class NotHermitian(QFError):
    pass


class NumericalFailure(QFError):
    pass


# system registry
class UnknownObservable(QFError, KeyError):
    pass


class UnknownState(QFError, KeyError):
    pass


class EmptyProbeSet(QFError, ValueError):
    pass


class DimensionMismatch(QFError, ValueError):
    pass


class NotDensity(QFError, ValueError):
    pass


class NoNondegenerateObservable(QFError, ValueError):
    pass


# commutative engine
class PartialFunction(QFError, ValueError):
    pass


class NotCompatible(QFError):
    pass


class NotProjection(QFError, ValueError):
    pass


# transition probabilities and embedding
class NotRankOne(QFError, ValueError):
    pass


class BasisNotOrthogonal(QFError, ValueError):
    pass


class BasisWrongSize(QFError, ValueError):
    pass


class MissingTransitionEntry(QFError, KeyError):
    pass


class UndecomposableProjection(QFError):
    pass


class MissingSpectralData(QFError):
    pass


class NotConvex(QFError, ValueError):
    pass


# contextuality
class IncompatibleContext(QFError):
    pass


class ProblemTooLarge(QFError):
    pass


class MalformedFamily(QFError, ValueError):
    pass


class InconsistentArrows(QFError, ValueError):
    pass


# model files / cli
class ParseError(QFError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class SchemaError(QFError):
    def __init__(self, message, field=None):
        self.field = field
        prefix = f"{field}: " if field else ""
        super().__init__(f"{prefix}{message}")


class UsageError(QFError):
    pass
