"""Utilities for finite symbols and canonical pair symbols."""

from __future__ import annotations

import re
from typing import Iterable, Sequence, Tuple, Union

from typing_extensions import TypeAlias

__all__ = [
    "Symbol",
    "ATOM_PATTERN",
    "is_atom",
    "pair",
    "nest",
    "unnest",
    "flatten_symbol",
    "rebracket",
    "format_symbol",
    "parse_symbol",
    "symbol_key",
    "sorted_symbols",
]


Symbol: TypeAlias = Union[str, Tuple["Symbol", "Symbol"]]

ATOM_PATTERN = re.compile(r"[A-Za-z0-9_.]+")


def is_atom(text: str) -> bool:
    """Check if the given text is a valid atomic symbol."""
    return ATOM_PATTERN.fullmatch(text) is not None


# Pair helpers


def pair(left: Symbol, right: Symbol) -> Symbol:
    """Build the canonical pair symbol ``(left,right)``."""
    return (left, right)


def nest(symbols: Sequence[Symbol]) -> Symbol:
    """Combine symbols into a left-nested pair, ``((s1,s2),s3)``.

    A single symbol is returned untouched.
    """
    if not symbols:
        raise ValueError("Cannot nest an empty sequence of symbols")
    result = symbols[0]
    for symbol in symbols[1:]:
        result = (result, symbol)
    return result


def unnest(symbol: Symbol, n: int) -> list[Symbol]:
    """Split a left-nested pair of ``n`` components back into a list."""
    if n < 1:
        raise ValueError("The component count must be greater than 0")
    if n == 1:
        return [symbol]
    if not isinstance(symbol, tuple):
        raise ValueError(f"Expected a pair symbol with {n} components, got {symbol!r}")
    left, right = symbol
    return unnest(left, n - 1) + [right]


def flatten_symbol(symbol: Symbol) -> tuple[str, ...]:
    """Forget the bracketing of a pair symbol.

    Two symbols are equal up to re-bracketing iff their flattenings match.
    """
    if isinstance(symbol, tuple):
        left, right = symbol
        return flatten_symbol(left) + flatten_symbol(right)
    return (symbol,)


def rebracket(symbol: Symbol) -> Symbol:
    """Return the left-nested bracketing of a pair symbol."""
    atoms = flatten_symbol(symbol)
    return nest(list(atoms))


# Text form


def format_symbol(symbol: Symbol) -> str:
    """Serialize a symbol, pairs being written ``(x,y)``."""
    if isinstance(symbol, tuple):
        left, right = symbol
        return f"({format_symbol(left)},{format_symbol(right)})"
    return symbol


def parse_symbol(text: str) -> Symbol:
    """Parse the serialized form of a symbol.

    A ``ValueError`` is raised with the offending offset on malformed input.
    """
    symbol, index = _parse_symbol_at(text, 0)
    if index != len(text):
        raise ValueError(f"Unexpected {text[index]!r} at offset {index} in {text!r}")
    return symbol


def _parse_symbol_at(text: str, index: int) -> tuple[Symbol, int]:
    if index < len(text) and text[index] == "(":
        left, index = _parse_symbol_at(text, index + 1)
        if index >= len(text) or text[index] != ",":
            raise ValueError(f"Expected ',' at offset {index} in {text!r}")
        right, index = _parse_symbol_at(text, index + 1)
        if index >= len(text) or text[index] != ")":
            raise ValueError(f"Expected ')' at offset {index} in {text!r}")
        return (left, right), index + 1
    match = ATOM_PATTERN.match(text, index)
    if match is None:
        raise ValueError(f"Expected a symbol at offset {index} in {text!r}")
    return match.group(), match.end()


def symbol_key(symbol: Symbol) -> tuple[object, ...]:
    """Total sort key over atoms and pairs (atoms first)."""
    if isinstance(symbol, tuple):
        return (1, tuple(symbol_key(part) for part in symbol))
    return (0, symbol)


def sorted_symbols(symbols: Iterable[Symbol]) -> list[Symbol]:
    """Sort symbols with `symbol_key`."""
    return sorted(symbols, key=symbol_key)
