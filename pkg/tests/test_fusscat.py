import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from nctraces.fusscat import (
    InconsistencyError,
    bracket_dim,
    bracket_dim_derooted,
    critical_point,
    fuss_catalan,
    g_eval,
    lln_limit,
    loop_mean,
    power_coeff,
    power_series,
    raney,
)
from nctraces.graphs import fc_tree, pascalize

from oracles import series_value, tree_walk_counts


def test_fuss_catalan_values():
    assert [fuss_catalan(2, n) for n in range(7)] == [1, 1, 3, 12, 55, 273, 1428]
    assert [fuss_catalan(3, n) for n in range(6)] == [1, 1, 4, 22, 140, 969]
    assert critical_point(2) == Fraction(4, 27)
    assert critical_point(3) == Fraction(27, 256)


def test_raney_matches_convolution():
    for s in (2, 3):
        for l in range(1, 5):
            series = power_series(s, l, 31)
            assert [raney(s, l, n) for n in range(31)] == series
            assert power_coeff(s, l, 30) == series[30]
    assert [power_coeff(2, 2, n) for n in range(5)] == [1, 2, 7, 30, 143]


def test_power_coeff_detects_disagreement(monkeypatch):
    import nctraces.fusscat as fc

    monkeypatch.setattr(fc, "raney", lambda s, l, n: 0)
    with pytest.raises(InconsistencyError):
        fc.power_coeff(2, 1, 3)


def test_g_eval_against_series():
    for s, z in ((2, 0.05), (2, 0.1), (3, 0.05)):
        coeffs = [float(fuss_catalan(s, n)) for n in range(200)]
        ev = g_eval(s, z)
        assert ev.value == pytest.approx(series_value(coeffs, z), abs=1e-12)
        deriv = series_value([n * c for n, c in enumerate(coeffs)][1:], z)
        assert ev.derivative == pytest.approx(deriv, rel=1e-9)


def test_g_eval_critical_points():
    assert g_eval(2, Fraction(4, 27)).value == pytest.approx(1.5, abs=1e-9)
    assert g_eval(3, Fraction(27, 256)).value == pytest.approx(4 / 3, abs=1e-9)
    assert g_eval(2, 4 / 27).derivative is None
    assert g_eval(2, 0).value == 1.0
    with pytest.raises(ValueError):
        g_eval(2, 0.2)
    with pytest.raises(ValueError):
        g_eval(2, -0.01)


def test_g_eval_frozen_value():
    # independent check: the real root of 0.1 x^3 - x + 1 below 1.5 via numpy
    import numpy as np

    roots = np.roots([0.1, 0, -1, 1])
    small = min(r.real for r in roots if abs(r.imag) < 1e-12 and 1 <= r.real <= 1.5)
    ev = g_eval(2, 0.1)
    assert ev.value == pytest.approx(small, abs=1e-13)
    assert ev.value == pytest.approx(1.1534673051457627, abs=1e-14)
    assert ev.derivative == pytest.approx(2.554153208673792, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([2, 3, 4]), st.floats(0, 1))
def test_g_eval_residual(s, t):
    z = t * float(critical_point(s))
    ev = g_eval(s, z)
    assert ev.residual <= 1e-12
    assert 1 <= ev.value <= (s + 1) / s + 1e-12


@pytest.mark.parametrize("s", [2, 3])
def test_bracket_matches_walk_counts(s):
    for n in range(9):
        for steps in (2 * n, 2 * n - 1):
            if steps < 0:
                continue
            for w, c in tree_walk_counts(s, steps).items():
                if len(w) <= 6 and (len(w) + 1) // 2 <= n and (steps == 2 * n) == (len(w) % 2 == 0):
                    assert bracket_dim(s, n, w) == c


@pytest.mark.parametrize("s", [2, 3])
def test_derooted_bracket_matches_walk_counts(s):
    root = str(s)
    for n in range(9):
        for steps in (2 * n, 2 * n - 1):
            if steps < 0:
                continue
            for w, c in tree_walk_counts(s, steps, root).items():
                d = len(w) - 1
                if d <= 5 and (d + 1) // 2 <= n and (steps == 2 * n) == (d % 2 == 0):
                    assert bracket_dim_derooted(s, n, w) == c


def test_bracket_examples():
    assert [bracket_dim(2, n, "") for n in range(7)] == [fuss_catalan(2, n) for n in range(7)]
    assert bracket_dim(2, 2, "2") == 3
    assert bracket_dim(2, 2, "a") == 3
    assert bracket_dim_derooted(2, 3, "2") == 30
    with pytest.raises(ValueError):
        bracket_dim(2, 0, "22")
    with pytest.raises(ValueError):
        bracket_dim_derooted(2, 2, "")


def test_bracket_matches_pascalized_dims():
    p = pascalize(fc_tree(2))
    dims = p.dims(8)
    for w, d in dims.items():
        assert bracket_dim(2, 4, w) == d


def test_loop_mean_and_limit():
    ev = g_eval(2, 0.1)
    assert loop_mean(0.1) == pytest.approx(2 * 0.1 * ev.derivative / ev.value)
    assert lln_limit(0.1) == pytest.approx(0.8857305958406948, rel=1e-12)
    assert lln_limit(0.1) == pytest.approx(loop_mean(0.1, 2))
    assert math.isinf(loop_mean(Fraction(4, 27)))
    with pytest.raises(ValueError):
        lln_limit(4 / 27)
    with pytest.raises(ValueError):
        lln_limit(0.05, s=3)
    assert lln_limit(0.05, s=3, experimental=True) > 0
