import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from nctraces.chains import (
    NotAMeasureError,
    aux_walk,
    ballot_chain,
    ballot_tail,
    ballot_up_probability,
    constant_up_chain,
    crossing_products,
    ergodic_estimate,
    fib_walk,
    marginals,
    motzkin_chain,
    motzkin_curve_point,
    motzkin_is_central,
    motzkin_root_marginal,
    trace_weights,
    transition_csv,
    transition_table,
    verify_centrality,
)
from nctraces.exact import AlgebraicNumber
from nctraces.fusscat import g_eval
from nctraces.graphs import EndSpec
from nctraces.paths import motzkin_number

CURVE = [motzkin_curve_point(t) for t in (1, 2, 3, Fraction(3, 2), None)]


def test_ballot_frozen_values():
    lam = Fraction(3, 4)
    assert ballot_up_probability(lam, 1) == Fraction(13, 16)
    assert ballot_up_probability(Fraction(1, 2), 3) == Fraction(5, 8)
    assert ballot_up_probability(Fraction(1), 4) == 1
    chain = ballot_chain(lam)
    assert chain.transitions(0, 0) == {1: 1}
    assert chain.transitions(3, 1) == {2: Fraction(13, 16), 0: Fraction(3, 16)}


@settings(max_examples=100, deadline=None)
@given(st.fractions(Fraction(1, 2), 1, max_denominator=50), st.integers(1, 30))
def test_ballot_float_matches_exact(lam, s):
    exact = ballot_up_probability(lam, s)
    assert ballot_up_probability(float(lam), s) == pytest.approx(float(exact), rel=1e-12)


def test_ballot_float_near_half_is_stable():
    s = 5
    assert ballot_up_probability(0.5 + 1e-12, s) == pytest.approx((s + 2) / (2 * (s + 1)), rel=1e-9)


@pytest.mark.parametrize("lam", [Fraction(1, 2), Fraction(3, 5), Fraction(3, 4), Fraction(1)])
def test_ballot_chain_is_central(lam):
    rep = verify_centrality(ballot_chain(lam), 10)
    assert rep.passed and rep.max_spread == 0


def test_centrality_by_path_enumeration():
    rep = verify_centrality(ballot_chain(Fraction(3, 5)), 8, enumerate_paths=True)
    assert rep.passed and rep.max_spread == 0


def test_control_chain_fails():
    rep = verify_centrality(constant_up_chain(Fraction(3, 10)), 6)
    assert not rep.passed
    assert rep.failures[0][:2] == (3, 1)
    assert "FAIL" in rep.summary()


def test_ballot_rejects_bad_lambda():
    with pytest.raises(ValueError):
        ballot_chain(Fraction(1, 3))
    with pytest.raises(ValueError):
        ballot_chain(1.5)


def test_ergodic_ratios_approach_transitions():
    lam = 0.75
    chain = ballot_chain(lam)
    from nctraces.graphs import semi_pascal

    tail = ballot_tail(lam, [500, 1000, 2000])
    ratios = ergodic_estimate(semi_pascal(), tail, ((3, 1), (4, 2)))
    target = chain.transition(3, 1, 2)
    errors = [abs(r - target) for r in ratios]
    assert errors[-1] < 1e-3
    assert errors[-1] < errors[0]


def test_motzkin_curve():
    for l1, l2 in CURVE:
        assert motzkin_is_central(l1, l2)
    assert motzkin_curve_point(1) == (Fraction(1, 3), Fraction(1, 3))
    assert motzkin_curve_point(2) == (Fraction(4, 7), Fraction(1, 7))
    assert not motzkin_is_central(Fraction(3, 10), Fraction(1, 5))


def doob_up(l1, l2, d):
    """Up-step probability of the time-homogeneous walk with harmonic h(d)."""
    if l2 == l1:
        h = lambda k: k + 1  # noqa: E731
    else:
        r = l2 / l1
        h = lambda k: 1 - r ** (k + 1)  # noqa: E731
    return l1 * h(d + 1) / h(d)


@pytest.mark.parametrize("point", CURVE)
def test_motzkin_on_curve_is_doob_transform(point):
    chain = motzkin_chain(*point)
    l1, l2 = max(point), min(point)
    l3 = 1 - l1 - l2
    for n in range(1, 9):
        for d in range(0, n + 1):
            t = chain.transitions(n, d)
            if t is None:
                continue
            assert t[d + 1] == doob_up(l1, l2, d)
            assert t[d] == l3
    assert verify_centrality(chain, 10).passed


def test_motzkin_root_marginal():
    # uniform weights on the curve point (1/3, 1/3): v_{n,0} = m_n / 3^n
    for n in range(10):
        assert motzkin_root_marginal(n, Fraction(1, 3), Fraction(1, 3)) == Fraction(motzkin_number(n), 3**n)
    chain = motzkin_chain(Fraction(1, 3), Fraction(1, 3))
    for n in range(8):
        assert chain.marginal_row(n)[0] == motzkin_root_marginal(n, Fraction(1, 3), Fraction(1, 3))


def test_motzkin_off_curve_is_not_a_measure():
    with pytest.raises(NotAMeasureError) as info:
        verify_centrality(motzkin_chain(Fraction(3, 10), Fraction(1, 5)), 6)
    assert info.value.n == 3
    with pytest.raises(NotAMeasureError):
        marginals(motzkin_chain(Fraction(1, 2), Fraction(1, 2)), 3)
    with pytest.raises(NotAMeasureError):
        marginals(motzkin_chain(0, 0), 3)


def test_motzkin_signed_rows_sum_to_one():
    chain = motzkin_chain(Fraction(3, 10), Fraction(1, 5), strict=False)
    for row in marginals(chain, 8):
        assert sum(row.values()) == 1


def test_motzkin_is_symmetric_in_parameters():
    a = motzkin_chain(Fraction(1, 7), Fraction(4, 7))
    b = motzkin_chain(Fraction(4, 7), Fraction(1, 7))
    assert a.transitions(4, 2) == b.transitions(4, 2)


@pytest.mark.parametrize("end", ["2", "2:12"])
@pytest.mark.parametrize("eta", [Fraction(0), Fraction(1, 20), Fraction(4, 27)])
def test_fib_walk_central(end, eta):
    rep = verify_centrality(fib_walk(end, eta), 10)
    assert rep.passed and rep.max_spread == 0


def test_fib_walk_rows():
    chain = fib_walk("2", Fraction(4, 27))
    # G = 3/2, so off the end: toward the end G^-l, to a label-c child eta G^c
    t = chain.transitions(2, "21")
    assert t == {"2": Fraction(2, 3), "212": Fraction(4, 27) * Fraction(9, 4)}
    assert chain.transitions(0, "") == {"2": 1}
    irr = fib_walk("2", Fraction(1, 20))
    assert isinstance(irr.walk.G, AlgebraicNumber)


def test_fib_walk_float_agrees_with_exact():
    exact = fib_walk("2:12", Fraction(1, 10))
    approx = fib_walk("2:12", 0.1)
    for n in range(6):
        for v in exact.graph.level(n):
            te, tf = exact.transitions(n, v), approx.transitions(n, v)
            for w in te:
                assert float(te[w]) == pytest.approx(tf[w], abs=1e-14)


def test_crossing_products():
    for chain in (fib_walk("2", 0.1), fib_walk("2:12", Fraction(1, 20))):
        eta = chain.walk.eta
        for v, w, prod in crossing_products(chain, 12):
            if chain.mode == "exact":
                assert prod == eta
            else:
                assert prod == pytest.approx(eta, abs=1e-12)


def test_aux_walk_crossing_and_root():
    chain = aux_walk(0.1)
    G = g_eval(2, 0.1).value
    for v, w, prod in crossing_products(chain, 12):
        if v == "2":
            assert prod == pytest.approx(1 / (G + G * G), abs=1e-12)
        else:
            assert prod == pytest.approx(0.1, abs=1e-12)
    assert chain.transitions(0, "2") == pytest.approx({"21": 1 / (1 + G), "22": G / (1 + G)})
    with pytest.raises(ValueError):
        aux_walk(0)


def test_derooted_and_higher_order_walks():
    chain = fib_walk("2", Fraction(1, 10), derooted=True)
    assert verify_centrality(chain, 8).passed
    chain3 = fib_walk(EndSpec("", "3", 3), Fraction(1, 50), s=3)
    assert verify_centrality(chain3, 7).passed
    for v, w, prod in crossing_products(chain3, 6):
        assert prod == Fraction(1, 50)


def test_marginals_and_weights():
    chain = ballot_chain(Fraction(3, 4))
    table = marginals(chain, 6)
    assert all(sum(row.values()) == 1 for row in table)
    w = trace_weights(chain, 6)
    dims = chain.graph.dims(6)
    assert all(w[v] * dims[v] == table[6][v] for v in dims)
    # a central measure's weight at v is the sum of the weights of its children
    below = trace_weights(chain, 5)
    for v, wv in below.items():
        assert wv == sum(w[u] * m for u, m in chain.graph.children_of(5, v).items())


def test_transition_export():
    chain = ballot_chain(Fraction(3, 4))
    rows = transition_table(chain, 2)
    assert rows[0] == {"level": 0, "from": 0, "to": 1, "p_num": 1, "p_den": 1, "p_float": 1.0}
    text = transition_csv(chain, 3)
    assert text.splitlines()[0] == "level,from,to,p_num,p_den,p_exact,p_float"
    assert "1,1,2,13,16,,0.8125" in text
    assert transition_csv(ballot_chain(0.75), 1).splitlines()[0] == "level,from,to,p_float"
