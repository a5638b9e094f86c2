import numpy as np
import pytest

from odeheat.expr import Expression, ExpressionError, parse


@pytest.mark.parametrize(
    "src,x,t,expected",
    [
        ("1", 0.3, 0.0, 1.0),
        ("2*x^2", 3.0, 0.0, 18.0),
        ("-x^2", 3.0, 0.0, -9.0),
        ("2^3^2", 0.0, 0.0, 512.0),
        ("(1+x)/2 - t", 1.0, 0.5, 0.5),
        ("-10*sin(pi*x)", 0.5, 0.0, -10.0),
        ("10*exp(-0.5*(x-0.5)^2)", 0.5, 0.0, 10.0),
        ("cos(t)", 0.0, 0.0, 1.0),
        ("1e-2*x", 2.0, 0.0, 0.02),
    ],
)
def test_values(src, x, t, expected):
    assert parse(src)(x, t) == pytest.approx(expected, rel=1e-15)


def test_vectorised_and_broadcast():
    x = np.linspace(0, 1, 5)
    np.testing.assert_allclose(parse("x*t")(x, 2.0), 2 * x)
    out = parse("3")(x)
    assert out.shape == (5,) and np.all(out == 3)
    assert Expression(0.25)(x).tolist() == [0.25] * 5


def test_variables_reported():
    assert parse("sin(x)*t").variables == ["t", "x"]
    assert parse("pi").variables == []


@pytest.mark.parametrize(
    "src",
    ["y + 1", "__import__('os')", "x.real", "sin(x, t)", "log(x)", "x if t else 1", "[x]", "x % 2", "'a'", "True", "x(1)", "sin(x=1)", "1 +"],
)
def test_rejected(src):
    with pytest.raises(ExpressionError):
        parse(src)


def test_non_string_rejected():
    with pytest.raises(ExpressionError):
        parse([1, 2])
