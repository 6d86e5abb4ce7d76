import pytest
import sympy as sp

from magconfine import ExpressionError, parse_expression
from magconfine._expression import r, x, y


def test_caret_and_double_star_are_powers():
    assert parse_expression("x^2") == parse_expression("x**2") == x**2


def test_decimal_literals_are_exact():
    assert parse_expression("0.1*x") == sp.Rational(1, 10) * x


def test_parameters_substituted():
    expr = parse_expression("alpha*(r-2)/(r-1)^2", {"alpha": 0.5})
    assert sp.simplify(expr - sp.Rational(1, 2) * (r - 2) / (r - 1) ** 2) == 0


def test_functions_and_pi():
    expr = parse_expression("sin(pi*x) + exp(-y) + sqrt(r)")
    assert expr == sp.sin(sp.pi * x) + sp.exp(-y) + sp.sqrt(r)


def test_unary_minus():
    assert parse_expression("-1/(1-r)") == -1 / (1 - r)


@pytest.mark.parametrize(
    "text, position",
    [
        ("1 + z", 4),
        ("  1 + z", 6),
        ("2*foo(x)", 2),
        ("x^2 + q", 6),
    ],
)
def test_error_positions(text, position):
    with pytest.raises(ExpressionError) as info:
        parse_expression(text)
    assert info.value.position == position
    assert info.value.expression == text


@pytest.mark.parametrize("text", ["1/(1-r", "x + )", "2 x"])
def test_syntax_error_position_in_range(text):
    with pytest.raises(ExpressionError) as info:
        parse_expression(text)
    assert 0 <= info.value.position <= len(text)
    assert "Syntax error" in str(info.value)


def test_unsupported_function_is_named():
    with pytest.raises(ExpressionError, match="Unsupported function 'abs'"):
        parse_expression("abs(x)")


def test_rejects_other_syntax():
    with pytest.raises(ExpressionError):
        parse_expression("x if y else r")
    with pytest.raises(ExpressionError):
        parse_expression("'text'")
    with pytest.raises(ExpressionError):
        parse_expression("   ")


def test_reserved_parameter_name():
    with pytest.raises(ValueError):
        parse_expression("x", {"r": 1.0})
