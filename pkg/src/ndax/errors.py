class NdaxError(Exception):
    """Base class for all package errors."""


class SpecificationError(NdaxError):
    """Malformed theory, mapping or formula (unknown atom, sort mismatch, ...)."""


class ExecutionError(NdaxError):
    """An action was executed where its precondition is false."""

    def __init__(self, message: str, action=None, state=None):
        super().__init__(message)
        self.action = action
        self.state = state


class CapacityError(NdaxError):
    """A configured size limit was exceeded."""


class PreconditionError(NdaxError):
    """An operation was called outside its contract (e.g. non-SD program)."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class StrategyIncompleteError(NdaxError):
    def __init__(self, message: str, key=None):
        super().__init__(message)
        self.key = key


class AmbiguityError(NdaxError):
    def __init__(self, message: str, parses=()):
        super().__init__(message)
        self.parses = tuple(parses)


class RefinementUnsoundError(NdaxError):
    def __init__(self, message: str, constraint: str = "", witness=None):
        super().__init__(message)
        self.constraint = constraint
        self.witness = witness


class UnsupportedConstructError(SpecificationError):
    """A program construct is not allowed in this position (e.g. || in a task)."""


class CoverageError(NdaxError):
    """An LL trace left every refinement hypothesis (no HL explanation can extend it)."""

    def __init__(self, message: str, trace=()):
        super().__init__(message)
        self.trace = tuple(trace)
