"""Exception hierarchy shared across the package."""


class LeafAssistError(Exception):
    """Base class for all package errors."""


class ConfigError(LeafAssistError):
    """Invalid or inconsistent configuration (bad keys, dim mismatch, auth failure)."""


class TransportError(LeafAssistError):
    """A remote dependency was unreachable, timed out, or kept failing after retries."""


class ProtocolError(LeafAssistError):
    """A remote dependency answered with a body we could not interpret."""


class ParseError(LeafAssistError):
    """Malformed input file. Carries the 1-based line number when one applies."""

    def __init__(self, message: str, line_no: int | None = None):
        super().__init__(message if line_no is None else f"line {line_no}: {message}")
        self.line_no = line_no
