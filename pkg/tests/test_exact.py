from fractions import Fraction

import pytest

from nctraces.exact import AlgebraicNumber, NumberField, g_exact
from nctraces.fusscat import g_eval


def test_rational_values():
    assert g_exact(2, Fraction(4, 27)) == Fraction(3, 2)
    assert g_exact(2, 0) == 1
    assert g_exact(3, Fraction(27, 256)) == Fraction(4, 3)


def test_irrational_value_is_exact_root():
    eta = Fraction(1, 20)
    G = g_exact(2, eta)
    assert isinstance(G, AlgebraicNumber)
    assert G.field.degree == 3
    assert eta * G**3 - G + 1 == 0
    assert float(G) == pytest.approx(g_eval(2, 0.05).value, abs=1e-14)


def test_field_arithmetic():
    G = g_exact(2, Fraction(1, 10))
    one = G / G
    assert one == 1
    assert (G + 1) * (G - 1) == G**2 - 1
    assert G ** -2 * G**2 == 1
    assert 1 / (1 + G) + G / (1 + G) == 1
    assert G > 1 and G < Fraction(3, 2)
    assert abs(-G) == G
    assert hash(G - G + Fraction(1, 3)) == hash(Fraction(1, 3))


def test_field_errors():
    G = g_exact(2, Fraction(1, 10))
    with pytest.raises(ZeroDivisionError):
        G / (G - G)
    other = NumberField([Fraction(-2), 0, 1], 2**0.5).generator()
    with pytest.raises(ValueError):
        G + other


def test_rejects_out_of_range():
    with pytest.raises(ValueError):
        g_exact(2, Fraction(1, 5))
