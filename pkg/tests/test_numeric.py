from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from core.errors import SingularMatrixError
from core.numeric import (
    NumberMode,
    format_scalar,
    invert,
    matrix,
    parse_rational,
    rational_bit_size,
    solve,
    vector,
)


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("1/2", Fraction(1, 2)),
        (" 3 / 4 ", Fraction(3, 4)),
        ("7", Fraction(7)),
        (3, Fraction(3)),
        (0.2, Fraction(1, 5)),
        ("0.25", Fraction(1, 4)),
    ],
)
def test_parse_rational(raw, expected):
    assert parse_rational(raw) == expected


def test_parse_rational_rejects_zero_denominator():
    with pytest.raises(ZeroDivisionError):
        parse_rational("1/0")


@pytest.mark.parametrize("raw", [True, None, [1], float("inf"), "abc"])
def test_parse_rational_rejects_non_numbers(raw):
    with pytest.raises(ValueError):
        parse_rational(raw)


def test_invert_exact():
    a = matrix([[1, Fraction(-2, 5)], [Fraction(-1, 6), 1]], NumberMode.RATIONAL)
    inverse = invert(a, NumberMode.RATIONAL)
    assert inverse[0, 0] == Fraction(15, 14)
    product = a @ inverse
    assert product[0, 0] == 1 and product[0, 1] == 0 and product[1, 0] == 0 and product[1, 1] == 1


def test_invert_singular():
    a = matrix([[1, 2], [2, 4]], NumberMode.RATIONAL)
    with pytest.raises(SingularMatrixError):
        invert(a, NumberMode.RATIONAL)
    with pytest.raises(SingularMatrixError):
        invert(matrix([[1, 2], [2, 4]], NumberMode.FLOAT), NumberMode.FLOAT)


def test_solve_matches_float():
    rows = [[4, 1, 0], [1, 3, 1], [0, 1, 2]]
    rhs = [1, 2, 3]
    exact = solve(matrix(rows, NumberMode.RATIONAL), vector(rhs, NumberMode.RATIONAL), NumberMode.RATIONAL)
    approx = solve(matrix(rows, NumberMode.FLOAT), vector(rhs, NumberMode.FLOAT), NumberMode.FLOAT)
    assert all(isinstance(v, Fraction) for v in exact)
    np.testing.assert_allclose([float(v) for v in exact], approx, rtol=1e-12)


def test_format_scalar():
    assert format_scalar(Fraction(14, 23)) == "14/23"
    assert format_scalar(Fraction(2)) == "2/1"
    assert format_scalar(0.5) == 0.5


@given(st.fractions(min_value=-1000, max_value=1000, max_denominator=10**6))
def test_parse_rational_accepts_formatted(value):
    assert parse_rational(format_scalar(value)) == value
    assert rational_bit_size(value) >= 1
