from __future__ import annotations

import typing as t

if t.TYPE_CHECKING:
    from reachavoid.solver import SolveStatus


def _rebuild(cls: t.Type[Exception], args: t.Tuple, state: t.Dict[str, t.Any]) -> Exception:
    exc = cls.__new__(cls)
    exc.args = args
    exc.__dict__.update(state)
    return exc


class ReachAvoidException(Exception):
    """
    Base exception class for reachavoid.
    """

    def __init__(self, message: str):
        self.message = message
        super().__init__(message)

    def __reduce__(self):
        # rebuilt without __init__: subclass constructors take other arguments than the message
        return _rebuild, (type(self), self.args, self.__dict__)


class InvalidInputError(ReachAvoidException, ValueError):
    """
    Exception raised when an operation receives malformed input, e.g. vectors of the
    wrong dimension or velocities above an agent's speed limit.
    """


class DegeneratePointError(ReachAvoidException):
    """
    Exception raised when a gradient is requested at a point where the capture
    frontier is not differentiable.
    """

    def __init__(self, point: t.Sequence[float]):
        self.point = tuple(float(c) for c in point)
        msg = f"Capture frontier is not differentiable at the attacker position {self.point}."
        super().__init__(msg)


class SolverError(ReachAvoidException):
    """
    Exception raised when a caller needs an optimal solution and the convex program
    did not deliver one.
    """

    def __init__(self, status: SolveStatus, what: str = "convex program"):
        self.status = status
        msg = f"The {what} finished with status '{status.value}'."
        super().__init__(msg)


class ConfigurationError(ReachAvoidException):
    """
    Exception raised when a config file or a scenario violates its schema or one of
    the game invariants.
    """

    def __init__(self, message: str, location: t.Optional[str] = None):
        self.location = location
        self.reason = message
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class UnsupportedDimensionError(ReachAvoidException):
    """
    Exception raised when an operation only exists for a given space dimension.
    """

    def __init__(self, dimension: int, supported: t.Sequence[int]):
        self.dimension = dimension
        msg = f"Dimension {dimension} is not supported here (supported: {list(supported)})."
        super().__init__(msg)


class ConsistencyError(ReachAvoidException):
    """
    Exception raised when an internal invariant of the allocation stack is broken.
    """


class ExceptionInRunner(ReachAvoidException):
    """
    Exception raised when an exception is raised in the executor.
    """

    def __init__(self):
        msg = "The runner thread which was running the trials raised an exception. Read the traceback above to debug it. You can also pass `raise_exceptions=False` in case you want failed trials to be recorded instead."
        super().__init__(msg)
