class MessError(Exception):
    """Base class for errors raised by the toolkit."""


class FormatError(MessError):
    """Input file does not follow the expected layout."""


class EmptyInputError(MessError):
    pass


class ParseError(MessError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ProtocolError(MessError):
    """A device received requests out of time order."""


class SaturationError(MessError):
    """Requested bandwidth is at or beyond what the device can serve."""


class SimulationError(MessError):
    pass


class OracleError(MessError):
    pass


class MessWarning(UserWarning):
    pass
