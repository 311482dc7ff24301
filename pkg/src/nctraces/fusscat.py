"""Fuss-Catalan numbers, the generating function G_s and bracket dimensions.

G_s(z) = sum_n C^s_n z^n is the power-series solution of G = z G^(s+1) + 1.
It converges up to the critical point s^s / (s+1)^(s+1), where G = (s+1)/s.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from math import comb

from .graphs import check_word, label_sum

NEWTON_CAP = 200
NEWTON_TOL = 1e-13
CRITICAL_SLACK = 1e-12


class InconsistencyError(ArithmeticError):
    """Two independent computations of the same quantity disagree."""


def critical_point(s: int) -> Fraction:
    _check_order(s)
    return Fraction(s**s, (s + 1) ** (s + 1))


def _check_order(s: int) -> None:
    if s < 2:
        raise ValueError("tree order s must be at least 2")


def fuss_catalan(s: int, n: int) -> int:
    _check_order(s)
    if n < 0:
        raise ValueError("n must be nonnegative")
    m = (s + 1) * n + 1
    return comb(m, n) // m


def raney(s: int, l: int, n: int) -> int:
    """l / ((s+1)n + l) * binom((s+1)n + l, n), the coefficient [z^n] G_s^l."""
    if n < 0:
        return 0
    if l == 0:
        return int(n == 0)
    m = (s + 1) * n + l
    value = Fraction(l * comb(m, n), m)
    assert value.denominator == 1
    return value.numerator


_series_lock = threading.Lock()
_power_series: dict[tuple[int, int], list[int]] = {}


def _convolve(a: list[int], b: list[int], size: int) -> list[int]:
    return [sum(a[i] * b[k - i] for i in range(k + 1)) for k in range(size)]


def power_series(s: int, l: int, size: int) -> list[int]:
    """First ``size`` coefficients of G_s^l by repeated convolution of C^s."""
    key = (s, l)
    table = _power_series.get(key)
    if table is not None and len(table) >= size:
        return table[:size]
    with _series_lock:
        base = [fuss_catalan(s, n) for n in range(size)]
        acc = [1] + [0] * (size - 1)
        for _ in range(l):
            acc = _convolve(acc, base, size)
        _power_series[key] = acc
    return acc[:size]


def power_coeff(s: int, l: int, n: int) -> int:
    """[z^n] G_s(z)^l, by the closed form, cross-checked against convolution."""
    _check_order(s)
    if l < 1 or n < 0:
        raise ValueError("need l >= 1 and n >= 0")
    closed = raney(s, l, n)
    series = power_series(s, l, n + 1)[n]
    if closed != series:
        raise InconsistencyError(f"[z^{n}]G_{s}^{l}: closed form {closed} != convolution {series}")
    return closed


@dataclass(frozen=True)
class GenFnEval:
    s: int
    z: float
    value: float
    derivative: float | None
    residual: float


def g_eval(s: int, z) -> GenFnEval:
    """Evaluate G_s and G_s' at 0 <= z <= critical point.

    The value is the smallest fixed point of g -> z g^(s+1) + 1 in
    [1, (s+1)/s], found by Newton's method from g = 1 (monotone here since
    the map is convex) with bisection as a fallback.  At the critical point
    the derivative is infinite and reported as None.
    """
    _check_order(s)
    zc = critical_point(s)
    at_critical = False
    if isinstance(z, (int, Fraction)):
        z = Fraction(z)
        if z < 0 or z > zc:
            raise ValueError(f"z={z} outside [0, {zc}]")
        at_critical = z == zc
    else:
        z = float(z)
        if not (0.0 <= z <= float(zc) + CRITICAL_SLACK):
            raise ValueError(f"z={z} outside [0, {float(zc)}]")
        # within rounding of the critical point the double root is ill-conditioned
        at_critical = z >= float(zc) * (1 - 4e-16)
    zf = float(z)
    top = (s + 1) / s
    if at_critical:
        g = top
    else:
        def h(x: float) -> float:
            return zf * x ** (s + 1) + 1 - x

        g = 1.0
        for _ in range(NEWTON_CAP):
            hg = h(g)
            if abs(hg) <= NEWTON_TOL:
                break
            slope = (s + 1) * zf * g**s - 1
            step = g - hg / slope
            if not (g < step <= top):
                break
            g = step
        if abs(h(g)) > NEWTON_TOL:
            lo, hi = g, top
            for _ in range(NEWTON_CAP):
                mid = 0.5 * (lo + hi)
                if h(mid) > 0:
                    lo = mid
                else:
                    hi = mid
                if hi - lo < 1e-16:
                    break
            g = lo
    residual = abs(g - zf * g ** (s + 1) - 1)
    if residual > 1e-12:
        raise ArithmeticError(f"G_{s}({zf}) did not converge: residual {residual}")
    derivative = None if at_critical else g ** (s + 1) / (1 - (s + 1) * zf * g**s)
    return GenFnEval(s, zf, g, derivative, residual)


def bracket_dim(s: int, n: int, w: str) -> int:
    """Closed-form count of walks on T^s from the root to w.

    Counts 2n-step walks when |w| is even and (2n-1)-step walks when |w| is
    odd: with k = n - ceil(|w|/2) and r = r(w) this is the coefficient
    [z^k] G_s^r.
    """
    w = check_word(w, s)
    k = n - (len(w) + 1) // 2
    if k < 0:
        raise ValueError(f"n={n} is too small for a word of length {len(w)}")
    return raney(s, label_sum(w, s), k)


def bracket_dim_derooted(s: int, n: int, w: str) -> int:
    """Walk counts on the derooted tree T^s from its root to w.

    ``w`` is the full word, starting with the root letter s.  With the
    distance d = |w| - 1 from the root, this counts 2n-step walks for d even
    and (2n-1)-step walks for d odd, and equals [z^k] G_s^(r(w)-1) for
    k = n - ceil(d/2).
    """
    w = check_word(w, s)
    if not w or w[0] != str(s):
        raise ValueError(f"{w!r} is not a vertex of the derooted tree")
    d = len(w) - 1
    k = n - (d + 1) // 2
    if k < 0:
        raise ValueError(f"n={n} is too small for a vertex at distance {d}")
    return raney(s, label_sum(w, s) - 1, k)


def loop_mean(eta: float, j: int = 1, s: int = 2) -> float:
    """Mean length of a loop at a label-j vertex in the exit-time decomposition.

    The loop has law P[Y = 2n] = C_n^(j) eta^n / G^j(eta), where C_n^(j) is
    [z^n] G^j, so its mean is 2 eta (G^j)'/G^j = 2 j eta G'/G.
    """
    ev = g_eval(s, eta)
    if ev.derivative is None:
        return math.inf
    return 2 * j * float(eta) * ev.derivative / ev.value


def lln_limit(eta: float, s: int = 2, experimental: bool = False) -> float:
    """f(eta) = 4 eta G'(eta) / G(eta) on the Fibonacci tree.

    For s >= 3 the analogue 2 eta (G_s^s)'/G_s^s is returned only with
    ``experimental=True``.
    """
    if s != 2 and not experimental:
        raise ValueError("lln_limit is established for s=2 only; pass experimental=True")
    zc = critical_point(s)
    if not 0 <= eta < zc:
        raise ValueError(f"eta={eta} outside [0, {zc}); the limit is infinite at the critical point")
    ev = g_eval(s, eta)
    if ev.derivative is None:
        raise ValueError(f"eta={eta} is within rounding of the critical point {zc}")
    return 2 * s * float(eta) * ev.derivative / ev.value
