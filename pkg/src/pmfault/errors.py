"""Exception hierarchy shared by every stage of the pipeline."""


class PmFaultError(Exception):
    """Base class for all errors raised by pmfault."""


# data
class MissingColumn(PmFaultError):
    def __init__(self, column):
        super().__init__(f"missing column {column!r}")
        self.column = column


class NonNumericCell(PmFaultError):
    def __init__(self, row, column, value):
        super().__init__(f"non-numeric value {value!r} at row {row}, column {column!r}")
        self.row = row
        self.column = column
        self.value = value


class EmptyFile(PmFaultError):
    pass


class EmptySeries(PmFaultError):
    pass


class InvalidSpec(PmFaultError):
    pass


class EmptyInput(PmFaultError):
    pass


# detection
class WindowTooLong(PmFaultError):
    pass


class InsufficientPool(PmFaultError):
    pass


# eventlog
class TooFewPoints(PmFaultError):
    pass


class DimensionMismatch(PmFaultError):
    pass


class WindowTooShort(PmFaultError):
    pass


class NoTransitions(PmFaultError):
    pass


class AllWindowsDegenerate(PmFaultError):
    pass


# petri
class NotEnabled(PmFaultError):
    def __init__(self, transition, marking=None):
        super().__init__(f"transition {transition!r} is not enabled")
        self.transition = transition
        self.marking = marking


class IsolatedNode(PmFaultError):
    pass


# discovery
class EmptyLog(PmFaultError):
    pass


# stochastic
class EmptyTimes(PmFaultError):
    pass


class MissingDistribution(PmFaultError):
    def __init__(self, state):
        super().__init__(f"no state-time distribution for state {state}")
        self.state = state


class TraceOverflow(PmFaultError):
    pass


class Deadlock(PmFaultError):
    def __init__(self, marking):
        super().__init__(f"deadlock at marking {dict(marking)}")
        self.marking = marking


class ZeroLengthWindow(PmFaultError):
    pass


class TooManyFailures(PmFaultError):
    pass


# conformance
class UnsoundModel(PmFaultError):
    pass


class SearchBudgetExceeded(PmFaultError):
    pass


class ZeroVarianceObserved(PmFaultError):
    pass


# diagnosis / cli
class NoTransitionsInWindow(PmFaultError):
    pass


class DictionaryFormatError(PmFaultError):
    def __init__(self, field, detail=""):
        msg = f"invalid dictionary manifest field {field!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.field = field


class ConfigError(PmFaultError):
    pass
