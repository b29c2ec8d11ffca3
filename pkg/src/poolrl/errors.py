"""Exception types raised across the package."""


class PoolRLError(ValueError):
    """Base class for all structured errors raised by this package."""


class DimensionError(PoolRLError):
    pass


class ValidationError(PoolRLError):
    """Invalid model, spec or file contents.

    ``line`` is the 1-based line number in the source file when the error
    comes from a loader, otherwise None.
    """

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip() if where else message)
        self.message = message


class SearchSpaceError(PoolRLError):
    pass


class ConvergenceError(PoolRLError):
    """An iterative solver hit its step cap. ``best`` holds the best iterate found."""

    def __init__(self, message: str, best=None, objective: float | None = None):
        super().__init__(message)
        self.best = best
        self.objective = objective


class MissingDataError(PoolRLError):
    pass
