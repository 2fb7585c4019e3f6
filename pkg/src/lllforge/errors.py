"""Exception hierarchy shared by the solver modules and the CLI."""


class LLLError(Exception):
    """Base class for every error raised by lllforge."""


class InputError(LLLError, ValueError):
    """Malformed or inconsistent input (CLI exit code 2)."""


class ParseError(InputError):
    pass


class MalformedHeader(ParseError):
    pass


class LiteralOutOfRange(ParseError):
    pass


class ClauseCountMismatch(ParseError):
    pass


class ValidationFailure(LLLError):
    """The system does not satisfy the LLL condition it was run under (exit code 1).

    The offending :class:`~lllforge.model.ValidationReport` is attached as
    ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConsistencyError(LLLError):
    """A bound that must hold for valid inputs was observed violated (exit code 3)."""


class EnumerationBoundExceeded(ConsistencyError):
    pass


class UnsupportedDomain(InputError):
    pass


class SpaceTooLarge(InputError):
    pass
