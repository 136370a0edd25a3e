"""Exception hierarchy shared by the library, the MCP tools and the CLI."""

from typing import Optional, Sequence


class GGRPOError(Exception):
    """Base class for all errors raised by ggrpo_lab."""


class DomainError(GGRPOError, ValueError):
    """Input lies outside the mathematical domain of the operation."""


class UsageError(GGRPOError, ValueError):
    """Caller violated an operation's precondition."""


class ConfigValueError(ValueError):
    """Cross-field config violation raised from a model validator.

    `loc` is the key path, relative to the validating model, that the
    diagnostic should point at.
    """

    def __init__(self, message: str, loc: Sequence[str | int]):
        super().__init__(message)
        self.loc = tuple(loc)


class ConfigError(GGRPOError):
    """Experiment config failed to parse or validate.

    Carries the file path, the 1-based line the problem was traced to and the
    dotted key path, so the CLI can print `<path>:<line>: <key>: <message>`.
    """

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        line: Optional[int] = None,
        key: Optional[str] = None,
    ):
        self.message = message
        self.path = path
        self.line = line
        self.key = key
        super().__init__(self.diagnostic())

    def diagnostic(self) -> str:
        location = self.path or "<config>"
        if self.line is not None:
            location = f"{location}:{self.line}"
        if self.key:
            return f"{location}: {self.key}: {self.message}"
        return f"{location}: {self.message}"
