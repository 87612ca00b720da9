"""Tokens of the expression grammar and the line structure of documents.

Documents are line oriented. The first significant line is the header.
A line starting at column 1 opens a section ``name:``, optionally with an
inline entry after the colon; indented lines are the entries of the
current section. ``#`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .spans import ParseError, SourceSpan

__all__ = [
    "Token",
    "tokenize",
    "Line",
    "Section",
    "Layout",
    "split_sections",
    "words",
]


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    column: int


_TOKEN = re.compile(
    r"""
    (?P<space>\s+)
  | (?P<number>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def tokenize(
    text: str, file: str = "<string>", line: int = 1, column: int = 1
) -> list[Token]:
    """Split an expression into tokens, ending with an ``end`` token."""
    tokens = []
    index = 0
    while index < len(text):
        match = _TOKEN.match(text, index)
        if match is None:
            raise ParseError(
                f"Unexpected character {text[index]!r}",
                SourceSpan(file, line, column + index),
            )
        kind = match.lastgroup
        assert kind is not None
        if kind != "space":
            tokens.append(Token(kind, match.group(), column + index))
        index = match.end()
    tokens.append(Token("end", "", column + len(text)))
    return tokens


@dataclass(frozen=True)
class Line:
    """A significant line, comments and surrounding blanks removed."""

    number: int
    column: int
    text: str

    def span(self, file: str, offset: int = 0, length: int | None = None) -> SourceSpan:
        size = len(self.text) - offset if length is None else length
        return SourceSpan(file, self.number, self.column + offset, max(size, 0))


@dataclass
class Section:
    name: str
    line: Line
    inline: Line | None = None
    entries: list[Line] = field(default_factory=list)

    def all_entries(self) -> list[Line]:
        return ([self.inline] if self.inline is not None else []) + self.entries


@dataclass
class Layout:
    file: str
    header: Line
    sections: list[Section]


def _significant(raw: str, number: int) -> Line | None:
    text = raw.split("#", 1)[0].rstrip()
    stripped = text.lstrip()
    if not stripped:
        return None
    return Line(number, len(text) - len(stripped) + 1, stripped)


def split_sections(text: str, file: str = "<string>") -> Layout:
    header: Line | None = None
    sections: list[Section] = []
    for number, raw in enumerate(text.splitlines(), 1):
        line = _significant(raw, number)
        if line is None:
            continue
        if header is None:
            if line.column != 1:
                raise ParseError("The header must start at column 1", line.span(file))
            header = line
            continue
        if line.column == 1:
            name, colon, rest = line.text.partition(":")
            if not colon or not re.fullmatch(r"[A-Za-z][A-Za-z0-9.\-]*", name):
                raise ParseError(
                    "Malformed section header", line.span(file), ("name:",)
                )
            inline = None
            stripped = rest.strip()
            if stripped:
                offset = len(name) + 1 + (len(rest) - len(rest.lstrip()))
                inline = Line(number, line.column + offset, stripped)
            sections.append(Section(name, line, inline))
        else:
            if not sections:
                raise ParseError(
                    "Indented entry outside of any section", line.span(file)
                )
            sections[-1].entries.append(line)
    if header is None:
        raise ParseError("Empty document", SourceSpan(file, 1, 1, 0), ("header",))
    return Layout(file, header, sections)


def words(line: Line) -> list[tuple[str, int]]:
    """Whitespace separated words of a line with their columns."""
    return [
        (match.group(), line.column + match.start())
        for match in re.finditer(r"\S+", line.text)
    ]
