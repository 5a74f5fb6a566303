"""Exception hierarchy shared by every pipeline stage."""


class PrompError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(PrompError, ValueError):
    pass


class SingularSystemError(PrompError, ArithmeticError):
    pass


class InsufficientDemonstrations(PrompError, ValueError):
    pass


class IncompatibleSeries(PrompError, ValueError):
    pass


class MalformedRecording(PrompError, ValueError):
    pass


class InsufficientStrokes(PrompError, ValueError):
    pass


class InsufficientData(PrompError, ValueError):
    pass


class ParseError(PrompError, ValueError):
    """Raised when an input file cannot be parsed; carries the offending line."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ConfigError(PrompError, ValueError):
    pass
