"""Recursive descent parser for arithmetic expressions.

Precedence, from loosest to tightest: ``+ -``, ``* /``, unary ``-``,
``^``. Binary operators associate to the left and exponents are
integers. A minus sign directly in front of a number literal is part of
the literal unless the literal is raised to a power.
"""

from __future__ import annotations

from ..expr import (
    FUNCTIONS,
    VARIABLE_PATTERN,
    Add,
    Call,
    Const,
    Div,
    Expr,
    Mul,
    Neg,
    Pow,
    Sub,
    Var,
)
from .lexer import Token, tokenize
from .spans import ParseError, SourceSpan

__all__ = ["parse_expr"]

_BINARY = {"+": Add, "-": Sub, "*": Mul, "/": Div}


class _Parser:
    def __init__(self, tokens: list[Token], file: str, line: int) -> None:
        self.tokens = tokens
        self.index = 0
        self.file = file
        self.line = line

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.index + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        token = self.current
        self.index += 1
        return token

    def error(
        self, message: str, *expected: str, token: Token | None = None
    ) -> ParseError:
        token = self.current if token is None else token
        span = SourceSpan(self.file, self.line, token.column, len(token.text))
        return ParseError(message, span, tuple(expected))

    def expect(self, text: str) -> Token:
        if self.current.text != text or self.current.kind == "end":
            found = self.current.text or "end of input"
            raise self.error(f"Unexpected {found!r}", text)
        return self.advance()

    def expression(self) -> Expr:
        left = self.term()
        while self.current.kind == "op" and self.current.text in "+-":
            op = self.advance().text
            left = _BINARY[op](left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.current.kind == "op" and self.current.text in "*/":
            op = self.advance().text
            left = _BINARY[op](left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.current.text == "-" and self.current.kind == "op":
            if self.peek().kind == "number" and self.peek(2).text != "^":
                self.advance()
                return Const(-float(self.advance().text))
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.current.text != "^":
            return base
        self.advance()
        sign = 1
        if self.current.text == "-":
            self.advance()
            sign = -1
        token = self.current
        if token.kind != "number" or not token.text.isdigit():
            raise self.error("Exponents must be integer literals", "integer")
        self.advance()
        return Pow(base, sign * int(token.text))

    def primary(self) -> Expr:
        token = self.current
        if token.kind == "number":
            self.advance()
            return Const(float(token.text))
        if token.kind == "name":
            self.advance()
            if self.current.text == "(":
                return self.call(token)
            if token.text in FUNCTIONS:
                raise self.error(f"Function {token.text!r} needs arguments", "(")
            if not VARIABLE_PATTERN.fullmatch(token.text):
                raise self.error(
                    f"Unknown variable {token.text!r}", "variable", token=token
                )
            return Var(token.text)
        if token.text == "(":
            self.advance()
            inner = self.expression()
            self.expect(")")
            return inner
        found = token.text or "end of input"
        raise self.error(f"Unexpected {found!r}", "number", "variable", "(", "-")

    def call(self, name: Token) -> Expr:
        if name.text not in FUNCTIONS:
            raise self.error(f"Unknown function {name.text!r}", *FUNCTIONS, token=name)
        self.expect("(")
        args = [self.expression()]
        while self.current.text == ",":
            self.advance()
            args.append(self.expression())
        self.expect(")")
        arity = FUNCTIONS[name.text]
        if len(args) != arity:
            raise self.error(
                f"{name.text} takes {arity} argument(s), got {len(args)}", token=name
            )
        return Call(name.text, tuple(args))


def parse_expr(
    text: str, file: str = "<string>", line: int = 1, column: int = 1
) -> Expr:
    """Parse an expression; ``line`` and ``column`` locate ``text`` in its file.

    Example::

        parse_expr("2*x1 + sin(a1)")  # Add(Mul(2, x1), Call("sin", (a1,)))
    """
    parser = _Parser(tokenize(text, file, line, column), file, line)
    expr = parser.expression()
    if parser.current.kind != "end":
        raise parser.error(
            f"Unexpected {parser.current.text!r}", "+", "-", "*", "/", "end of input"
        )
    return expr
