"""Arithmetic expressions over named real variables.

Expressions are immutable trees. They evaluate elementwise on numpy arrays,
differentiate symbolically and print back to the text accepted by
`aglens.dsl.parse_expr`.

Variables are named ``x1, x2, ...`` for states, ``a1, a2, ...`` for
inputs and ``o1, o2, ...`` for observations.

Example::

    x1, a1 = Var("x1"), Var("a1")
    phi = x1**2 + a1 * x1
    diff_expr(phi, "x1")  # 2*x1 + a1
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import singledispatch
from typing import Callable, Iterable, Mapping, Union

import numpy as np
from typing_extensions import TypeAlias

from .core import AglensError

__all__ = [
    "ExprError",
    "Expr",
    "Const",
    "Var",
    "Neg",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Pow",
    "Call",
    "FUNCTIONS",
    "VARIABLE_PATTERN",
    "state_vars",
    "input_vars",
    "obs_vars",
    "as_expr",
    "evaluate",
    "eval_expr",
    "eval_array",
    "diff_expr",
    "grad_expr",
    "free_variables",
    "substitute",
    "rename",
    "format_expr",
    "format_float",
]


Value: TypeAlias = Union[float, np.ndarray]
Env: TypeAlias = Mapping[str, Value]

VARIABLE_PATTERN = re.compile(r"[xao][1-9][0-9]*")

FUNCTIONS: dict[str, int] = {
    "sin": 1,
    "cos": 1,
    "exp": 1,
    "abs": 1,
    "min": 2,
    "max": 2,
}


class ExprError(AglensError, ValueError):
    """Raised when an expression cannot be evaluated or differentiated."""


def state_vars(n: int) -> list[str]:
    return [f"x{i}" for i in range(1, n + 1)]


def input_vars(m: int) -> list[str]:
    return [f"a{i}" for i in range(1, m + 1)]


def obs_vars(k: int) -> list[str]:
    return [f"o{i}" for i in range(1, k + 1)]


# Nodes


class Expr:
    """Base class of expression nodes.

    Python operators build simplified trees, the node constructors build
    trees exactly as given.
    """

    __slots__ = ()

    def children(self) -> tuple[Expr, ...]:
        return ()

    def __add__(self, other: Expr | float) -> Expr:
        return add(self, as_expr(other))

    def __radd__(self, other: float) -> Expr:
        return add(as_expr(other), self)

    def __sub__(self, other: Expr | float) -> Expr:
        return sub(self, as_expr(other))

    def __rsub__(self, other: float) -> Expr:
        return sub(as_expr(other), self)

    def __mul__(self, other: Expr | float) -> Expr:
        return mul(self, as_expr(other))

    def __rmul__(self, other: float) -> Expr:
        return mul(as_expr(other), self)

    def __truediv__(self, other: Expr | float) -> Expr:
        return div(self, as_expr(other))

    def __rtruediv__(self, other: float) -> Expr:
        return div(as_expr(other), self)

    def __neg__(self) -> Expr:
        return neg(self)

    def __pow__(self, exponent: int) -> Expr:
        if not isinstance(exponent, int):
            return NotImplemented
        return power(self, exponent)

    def __str__(self) -> str:
        return format_expr(self)


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", float(self.value))

    def __repr__(self) -> str:
        return f"Const({format_float(self.value)})"


@dataclass(frozen=True, repr=False)
class Var(Expr):
    name: str

    def __repr__(self) -> str:
        return f"Var({self.name})"


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def children(self) -> tuple[Expr, ...]:
        return (self.arg,)


@dataclass(frozen=True)
class _Binary(Expr):
    left: Expr
    right: Expr

    def children(self) -> tuple[Expr, ...]:
        return (self.left, self.right)


@dataclass(frozen=True)
class Add(_Binary):
    pass


@dataclass(frozen=True)
class Sub(_Binary):
    pass


@dataclass(frozen=True)
class Mul(_Binary):
    pass


@dataclass(frozen=True)
class Div(_Binary):
    pass


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int

    def children(self) -> tuple[Expr, ...]:
        return (self.base,)


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: tuple[Expr, ...]

    def __post_init__(self) -> None:
        if self.func not in FUNCTIONS:
            raise ExprError(f"Unknown function {self.func!r}")
        if len(self.args) != FUNCTIONS[self.func]:
            raise ExprError(
                f"{self.func} takes {FUNCTIONS[self.func]} argument(s), "
                f"got {len(self.args)}"
            )
        object.__setattr__(self, "args", tuple(self.args))

    def children(self) -> tuple[Expr, ...]:
        return self.args


def as_expr(value: Expr | float | str) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return Var(value)
    return Const(float(value))


# Simplifying constructors


def _is_const(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def add(left: Expr, right: Expr) -> Expr:
    if isinstance(left, Const) and isinstance(right, Const):
        return Const(left.value + right.value)
    if _is_const(left, 0.0):
        return right
    if _is_const(right, 0.0):
        return left
    return Add(left, right)


def sub(left: Expr, right: Expr) -> Expr:
    if isinstance(left, Const) and isinstance(right, Const):
        return Const(left.value - right.value)
    if _is_const(right, 0.0):
        return left
    if _is_const(left, 0.0):
        return neg(right)
    return Sub(left, right)


def mul(left: Expr, right: Expr) -> Expr:
    if isinstance(left, Const) and isinstance(right, Const):
        return Const(left.value * right.value)
    if _is_const(left, 0.0) or _is_const(right, 0.0):
        return Const(0.0)
    if _is_const(left, 1.0):
        return right
    if _is_const(right, 1.0):
        return left
    return Mul(left, right)


def div(left: Expr, right: Expr) -> Expr:
    if _is_const(right, 1.0):
        return left
    if _is_const(left, 0.0) and not _is_const(right, 0.0):
        return Const(0.0)
    return Div(left, right)


def neg(arg: Expr) -> Expr:
    if isinstance(arg, Const):
        return Const(-arg.value)
    if isinstance(arg, Neg):
        return arg.arg
    return Neg(arg)


def power(base: Expr, exponent: int) -> Expr:
    if exponent == 0:
        return Const(1.0)
    if exponent == 1:
        return base
    return Pow(base, exponent)


def call(func: str, *args: Expr) -> Expr:
    return Call(func, tuple(args))


# Evaluation


@singledispatch
def evaluate(expr: Expr, env: Env) -> Value:
    """Evaluate an expression, elementwise over array-valued variables."""
    raise ExprError(f"Cannot evaluate {type(expr).__name__}")


@evaluate.register
def _(expr: Const, env: Env) -> Value:
    return expr.value


@evaluate.register
def _(expr: Var, env: Env) -> Value:
    try:
        return env[expr.name]
    except KeyError:
        raise ExprError(f"Unknown variable {expr.name!r}") from None


@evaluate.register
def _(expr: Neg, env: Env) -> Value:
    return -evaluate(expr.arg, env)


@evaluate.register
def _(expr: Add, env: Env) -> Value:
    return evaluate(expr.left, env) + evaluate(expr.right, env)


@evaluate.register
def _(expr: Sub, env: Env) -> Value:
    return evaluate(expr.left, env) - evaluate(expr.right, env)


@evaluate.register
def _(expr: Mul, env: Env) -> Value:
    return evaluate(expr.left, env) * evaluate(expr.right, env)


@evaluate.register
def _(expr: Div, env: Env) -> Value:
    numerator = evaluate(expr.left, env)
    denominator = evaluate(expr.right, env)
    if np.any(np.asarray(denominator) == 0):
        raise ExprError(f"Division by zero in {format_expr(expr)}")
    return numerator / denominator


@evaluate.register
def _(expr: Pow, env: Env) -> Value:
    base = evaluate(expr.base, env)
    if expr.exponent < 0:
        if np.any(np.asarray(base) == 0):
            raise ExprError(f"Division by zero in {format_expr(expr)}")
        return 1.0 / np.power(base, -expr.exponent)
    return np.power(base, expr.exponent)


_NUMPY_FUNCTIONS: dict[str, Callable[..., Value]] = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "abs": np.abs,
    "min": np.minimum,
    "max": np.maximum,
}


@evaluate.register
def _(expr: Call, env: Env) -> Value:
    args = [evaluate(arg, env) for arg in expr.args]
    return _NUMPY_FUNCTIONS[expr.func](*args)


def eval_expr(expr: Expr, env: Mapping[str, float]) -> float:
    """Evaluate at a single point."""
    with np.errstate(over="ignore", invalid="ignore"):
        return float(evaluate(expr, env))


def eval_array(expr: Expr, env: Mapping[str, np.ndarray], size: int) -> np.ndarray:
    """Evaluate on ``size`` samples, broadcasting constant results."""
    with np.errstate(over="ignore", invalid="ignore"):
        value = evaluate(expr, env)
    return np.broadcast_to(np.asarray(value, dtype=float), (size,)).copy()


# Differentiation


@singledispatch
def _diff(expr: Expr, var: str) -> Expr:
    raise ExprError(f"Cannot differentiate {type(expr).__name__}")


@_diff.register
def _(expr: Const, var: str) -> Expr:
    return Const(0.0)


@_diff.register
def _(expr: Var, var: str) -> Expr:
    return Const(1.0 if expr.name == var else 0.0)


@_diff.register
def _(expr: Neg, var: str) -> Expr:
    return neg(_diff(expr.arg, var))


@_diff.register
def _(expr: Add, var: str) -> Expr:
    return add(_diff(expr.left, var), _diff(expr.right, var))


@_diff.register
def _(expr: Sub, var: str) -> Expr:
    return sub(_diff(expr.left, var), _diff(expr.right, var))


@_diff.register
def _(expr: Mul, var: str) -> Expr:
    left = mul(_diff(expr.left, var), expr.right)
    right = mul(expr.left, _diff(expr.right, var))
    return add(left, right)


@_diff.register
def _(expr: Div, var: str) -> Expr:
    numerator = sub(
        mul(_diff(expr.left, var), expr.right),
        mul(expr.left, _diff(expr.right, var)),
    )
    return div(numerator, power(expr.right, 2))


@_diff.register
def _(expr: Pow, var: str) -> Expr:
    inner = _diff(expr.base, var)
    if _is_const(inner, 0.0):
        return Const(0.0)
    outer = mul(Const(float(expr.exponent)), power(expr.base, expr.exponent - 1))
    return mul(outer, inner)


@_diff.register
def _(expr: Call, var: str) -> Expr:
    if var not in free_variables(expr):
        return Const(0.0)
    if expr.func in ("abs", "min", "max"):
        raise ExprError(
            f"Cannot differentiate through {expr.func}, give a smooth expression"
        )
    (arg,) = expr.args
    inner = _diff(arg, var)
    if expr.func == "sin":
        outer = call("cos", arg)
    elif expr.func == "cos":
        outer = neg(call("sin", arg))
    else:
        outer = call("exp", arg)
    return mul(outer, inner)


def diff_expr(expr: Expr, var: str) -> Expr:
    """Symbolic partial derivative with respect to ``var``."""
    return _diff(expr, var)


def grad_expr(expr: Expr, variables: Iterable[str]) -> tuple[Expr, ...]:
    return tuple(diff_expr(expr, v) for v in variables)


# Structure


def free_variables(expr: Expr) -> frozenset[str]:
    if isinstance(expr, Var):
        return frozenset((expr.name,))
    result: frozenset[str] = frozenset()
    for child in expr.children():
        result |= free_variables(child)
    return result


def substitute(expr: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables simultaneously, keeping the tree shape."""
    if isinstance(expr, Var):
        return mapping.get(expr.name, expr)
    if isinstance(expr, Const):
        return expr
    if isinstance(expr, Neg):
        return Neg(substitute(expr.arg, mapping))
    if isinstance(expr, _Binary):
        return type(expr)(
            substitute(expr.left, mapping), substitute(expr.right, mapping)
        )
    if isinstance(expr, Pow):
        return Pow(substitute(expr.base, mapping), expr.exponent)
    if isinstance(expr, Call):
        return Call(expr.func, tuple(substitute(a, mapping) for a in expr.args))
    raise ExprError(f"Cannot substitute in {type(expr).__name__}")


def rename(expr: Expr, names: Mapping[str, str]) -> Expr:
    return substitute(expr, {old: Var(new) for old, new in names.items()})


# Printing

_ADDITIVE, _MULTIPLICATIVE, _UNARY, _POWER, _ATOM = 1, 2, 3, 4, 5

_OPERATORS: dict[type, tuple[str, int]] = {
    Add: (" + ", _ADDITIVE),
    Sub: (" - ", _ADDITIVE),
    Mul: ("*", _MULTIPLICATIVE),
    Div: ("/", _MULTIPLICATIVE),
}


def format_float(value: float) -> str:
    """Shortest text that reads back as the same float."""
    value = float(value)
    if not np.isfinite(value):
        return repr(value)
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _precedence(expr: Expr) -> int:
    if isinstance(expr, Const):
        return _UNARY if expr.value < 0 else _ATOM
    if isinstance(expr, Neg):
        return _UNARY
    if isinstance(expr, Pow):
        return _POWER
    if isinstance(expr, _Binary):
        return _OPERATORS[type(expr)][1]
    return _ATOM


def _wrap(expr: Expr, parens: bool) -> str:
    text = format_expr(expr)
    return f"({text})" if parens else text


def format_expr(expr: Expr) -> str:
    """Print with the fewest parentheses that parse back to the same tree."""
    if isinstance(expr, Const):
        return format_float(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Neg):
        arg = expr.arg
        return "-" + _wrap(arg, isinstance(arg, Const) or _precedence(arg) < _UNARY)
    if isinstance(expr, Pow):
        return f"{_wrap(expr.base, _precedence(expr.base) <= _POWER)}^{expr.exponent}"
    if isinstance(expr, _Binary):
        symbol, level = _OPERATORS[type(expr)]
        left = _wrap(expr.left, _precedence(expr.left) < level)
        right = _wrap(expr.right, _precedence(expr.right) <= level)
        return f"{left}{symbol}{right}"
    if isinstance(expr, Call):
        return f"{expr.func}({', '.join(format_expr(a) for a in expr.args)})"
    raise ExprError(f"Cannot print {type(expr).__name__}")
