import math
import random

import numpy as np
import pytest

from aglens.dsl import ParseError, parse_expr
from aglens.expr import (
    Add,
    Call,
    Const,
    ExprError,
    Mul,
    Neg,
    Pow,
    Sub,
    Var,
    diff_expr,
    eval_array,
    eval_expr,
    format_expr,
    format_float,
    free_variables,
    grad_expr,
    rename,
    substitute,
)

x1, x2, a1 = Var("x1"), Var("x2"), Var("a1")


def test_parse_precedence():
    assert parse_expr("2*x1 + sin(a1)") == Add(
        Mul(Const(2), x1), Call("sin", (a1,))
    )
    assert parse_expr("x1^2 - 0.5*x1") == Sub(Pow(x1, 2), Mul(Const(0.5), x1))
    assert parse_expr("x1 - x2 - a1") == Sub(Sub(x1, x2), a1)
    assert parse_expr("-x1^2") == Neg(Pow(x1, 2))
    assert parse_expr("(-x1)^2") == Pow(Neg(x1), 2)


def test_negative_literals():
    assert parse_expr("-2") == Const(-2)
    assert parse_expr("-2*x1") == Mul(Const(-2), x1)
    assert parse_expr("-2^2") == Neg(Pow(Const(2), 2))
    assert eval_expr(parse_expr("-2^2"), {}) == -4.0
    assert parse_expr("-(2)") == Neg(Const(2))
    assert parse_expr("x1^-1") == Pow(x1, -1)


@pytest.mark.parametrize(
    "text",
    [
        "2*x1 + sin(a1)",
        "x1^2 - 0.5*x1",
        "-(x1 + a1)",
        "x1/(a1*x1)",
        "-x1^2",
        "(-x1)^2",
        "max(x1, -3)",
        "x1 - (a1 - x2)",
        "-(2)",
        "-2*x1",
        "x1*-2",
        "x1^-1",
        "-2^2",
        "x1 - -1",
        "1e-05*x1",
        "exp(-x1)*cos(o1)",
    ],
)
def test_print_parse(text):
    expr = parse_expr(text)
    assert format_expr(expr) == text
    assert parse_expr(format_expr(expr)) == expr


@pytest.mark.parametrize(
    "text, column, expected",
    [
        ("2*(x1", 6, (")",)),
        ("x1 +", 5, ("number", "variable", "(", "-")),
        ("x1 x2", 4, ("+", "-", "*", "/", "end of input")),
        ("x1^x2", 4, ("integer",)),
        ("x1^1.5", 4, ("integer",)),
        ("sin", 4, ("(",)),
        ("y1", 1, ("variable",)),
        ("x1 $ 2", 4, ()),
    ],
)
def test_parse_errors(text, column, expected):
    with pytest.raises(ParseError) as info:
        parse_expr(text, file="field.ode", line=3)
    error = info.value
    assert error.span.line == 3
    assert error.span.column == column
    assert error.expected == expected
    assert str(error).startswith(f"field.ode:3:{column}: ")


def test_parse_error_offsets():
    with pytest.raises(ParseError) as info:
        parse_expr("2*(x1", line=2, column=5)
    assert info.value.span.column == 10
    with pytest.raises(ParseError, match="takes 2 argument"):
        parse_expr("max(x1)")
    with pytest.raises(ParseError, match="Unknown function 'foo'"):
        parse_expr("foo(x1)")


def test_evaluate():
    env = {"x1": 2.0, "a1": -1.0}
    assert eval_expr(parse_expr("x1^2 + a1*x1"), env) == 2.0
    assert eval_expr(parse_expr("min(x1, a1) + max(x1, a1)"), env) == 1.0
    assert eval_expr(parse_expr("abs(a1)"), env) == 1.0
    assert eval_expr(parse_expr("x1^-1"), env) == 0.5
    with pytest.raises(ExprError, match="Division by zero"):
        eval_expr(parse_expr("x1/(a1 + 1)"), env)
    with pytest.raises(ExprError, match="Division by zero"):
        eval_expr(parse_expr("(a1 + 1)^-2"), env)
    with pytest.raises(ExprError, match="Unknown variable 'x2'"):
        eval_expr(x2, env)


def test_eval_array():
    env = {"x1": np.array([0.0, 1.0, 2.0])}
    np.testing.assert_array_equal(eval_array(x1**2, env, 3), [0.0, 1.0, 4.0])
    np.testing.assert_array_equal(eval_array(Const(2.0), env, 3), [2.0, 2.0, 2.0])


def test_diff():
    derivative = diff_expr(x1**2 + a1 * x1, "x1")
    assert format_expr(derivative) == "2*x1 + a1"
    assert eval_expr(diff_expr(Call("sin", (x1,)), "x1"), {"x1": 0.0}) == 1.0
    assert diff_expr(Call("abs", (a1,)), "x1") == Const(0.0)
    assert grad_expr(x1 * x2, ["x1", "x2"]) == (x2, x1)
    with pytest.raises(ExprError, match="through abs"):
        diff_expr(Call("abs", (x1,)), "x1")


def random_polynomial(rng):
    expr = Const(0.0)
    for i in range(4):
        for j in range(4 - i):
            if rng.random() < 0.5:
                coefficient = round(rng.uniform(-2, 2), 3)
                expr = expr + coefficient * x1**i * a1**j
    return expr


@pytest.mark.parametrize("seed", range(10))
def test_diff_against_finite_differences(seed):
    rng = random.Random(seed)
    poly = random_polynomial(rng)
    derivative = diff_expr(poly, "x1")
    h = 1e-4
    for _ in range(100):
        x, a = rng.uniform(-2, 2), rng.uniform(-2, 2)
        exact = eval_expr(derivative, {"x1": x, "a1": a})
        forward = eval_expr(poly, {"x1": x + h, "a1": a})
        backward = eval_expr(poly, {"x1": x - h, "a1": a})
        approx = (forward - backward) / (2 * h)
        assert abs(exact - approx) <= 1e-6 * max(1.0, abs(exact))


def test_smooth_functions():
    expr = Call("exp", (Call("cos", (x1,)),))
    derivative = diff_expr(expr, "x1")
    value = eval_expr(derivative, {"x1": 0.5})
    assert value == pytest.approx(-math.sin(0.5) * math.exp(math.cos(0.5)))


def test_structure():
    expr = parse_expr("x1*a1 + sin(x2)")
    assert free_variables(expr) == {"x1", "a1", "x2"}
    assert substitute(expr, {"x1": Const(2.0)}) == parse_expr("2*a1 + sin(x2)")
    assert rename(expr, {"x2": "x1"}) == parse_expr("x1*a1 + sin(x1)")


def test_format_float():
    assert format_float(2.0) == "2"
    assert format_float(0.1) == "0.1"
    assert format_float(np.float64(0.5)) == "0.5"
    assert format_float(np.float64(-3.0)) == "-3"
    assert format_expr(Const(np.float64(0.25)) * x1) == "0.25*x1"
