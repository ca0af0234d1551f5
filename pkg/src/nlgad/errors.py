"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
InternalError -> 4.
"""


class NlgadError(Exception):
    """Base class for all package errors."""


class ConfigError(NlgadError):
    """Invalid configuration value or combination."""


class CapacityError(ConfigError):
    """An injection request exceeds the nodes available for it."""


class DataError(NlgadError):
    """Malformed or inconsistent input data."""


class GraphParseError(DataError):
    """A graph text file failed to parse.

    Carries the offending path and 1-based line number when known.
    """

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}:"
            if line is not None:
                loc += f"{line}:"
            loc += " "
        super().__init__(loc + message)
        self.path = path
        self.line = line


class ShapeError(NlgadError):
    """Tensor shapes are incompatible for the requested operation."""


class InternalError(NlgadError):
    """An internal invariant was violated; indicates a bug."""
