"""Exception hierarchy shared by the library and the command line."""


class SpkgError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(SpkgError, ValueError):
    """Invalid or contradictory configuration."""


class DataError(SpkgError, ValueError):
    """Input triples could not be parsed or resolved."""


class ParseError(DataError):
    """A record in a triple file is malformed."""

    def __init__(self, message, line=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.line = line
        self.path = path


class NumericalError(SpkgError, FloatingPointError):
    """A loss or gradient became non-finite during training."""

    def __init__(self, message, best_model=None):
        super().__init__(message)
        self.best_model = best_model
