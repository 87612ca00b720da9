"""Source locations and parse errors."""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["SourceSpan", "ParseError"]


@dataclass(frozen=True)
class SourceSpan:
    """A run of ``length`` characters starting at a 1-based line and column."""

    file: str
    line: int
    column: int
    length: int = 1

    def __post_init__(self) -> None:
        if self.line < 1 or self.column < 1:
            raise ValueError("Lines and columns are 1-based")
        if self.length < 0:
            raise ValueError("A span cannot have a negative length")

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


class ParseError(Exception):
    """Parsing failure.

    ``expected`` lists the tokens or constructs that would have been
    accepted at ``span``.
    """

    def __init__(
        self, message: str, span: SourceSpan, expected: tuple[str, ...] = ()
    ) -> None:
        super().__init__(message, span, expected)
        self.message = message
        self.span = span
        self.expected = tuple(expected)

    def __str__(self) -> str:
        text = f"{self.span}: {self.message}"
        if self.expected:
            text += ", expected " + " or ".join(repr(e) for e in self.expected)
        return text
