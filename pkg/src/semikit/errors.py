"""Exception types shared across the package."""


class SemikitError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(SemikitError, ValueError):
    """Array dimensions do not match what an operation requires."""


class ConfigError(SemikitError, ValueError):
    """A configuration value or combination of values is invalid."""


class StateError(SemikitError, RuntimeError):
    """An operation was called before the state it depends on exists."""


class ParseError(SemikitError, ValueError):
    """A config or data file could not be parsed.

    ``line`` is the 1-based line number when a specific line is at fault,
    otherwise None.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        super().__init__(prefix + message)


class DivergenceError(SemikitError, RuntimeError):
    """Training produced a non-finite loss; names the failing iteration."""

    def __init__(self, iteration, detail=""):
        self.iteration = iteration
        msg = f"non-finite loss at iteration {iteration}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
