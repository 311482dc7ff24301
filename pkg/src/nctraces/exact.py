"""Exact arithmetic for probabilities that involve G_s(eta) at rational eta.

G_s(eta) is a root of eta x^(s+1) - x + 1.  When that root is rational it is
returned as a Fraction; otherwise computations happen in the number field
Q[x]/(f) where f is the irreducible factor having G_s(eta) as a root.  The
field elements compare exactly for equality and through the real embedding
(x = G_s(eta)) for ordering.
"""
from __future__ import annotations

from fractions import Fraction
from functools import total_ordering

import sympy

from .fusscat import critical_point, g_eval


def _trim(c: list[Fraction]) -> list[Fraction]:
    while c and c[-1] == 0:
        c.pop()
    return c


def _poly_divmod(a: list[Fraction], b: list[Fraction]) -> tuple[list[Fraction], list[Fraction]]:
    a = list(a)
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 1)
    while len(_trim(a)) >= len(b):
        shift = len(a) - len(b)
        coef = a[-1] / b[-1]
        q[shift] = coef
        for i, bc in enumerate(b):
            a[shift + i] -= coef * bc
    return _trim(q), a


class NumberField:
    """Q[x]/(modulus) with a chosen real root for ordering."""

    def __init__(self, modulus: list[Fraction], root: float):
        lead = Fraction(modulus[-1])
        self.modulus = [Fraction(c) / lead for c in modulus]
        self.degree = len(self.modulus) - 1
        self.root = root
        self._powers = [root**i for i in range(self.degree)]

    def reduce(self, c: list[Fraction]) -> tuple[Fraction, ...]:
        _, r = _poly_divmod(c, self.modulus)
        r = r + [Fraction(0)] * (self.degree - len(r))
        return tuple(r)

    def element(self, coeffs) -> "AlgebraicNumber":
        return AlgebraicNumber(self, self.reduce([Fraction(c) for c in coeffs]))

    def generator(self) -> "AlgebraicNumber":
        return self.element([0, 1])

    def inverse(self, c: tuple[Fraction, ...]) -> tuple[Fraction, ...]:
        # extended Euclid: find u with u*c = 1 mod modulus
        r0, r1 = list(self.modulus), _trim(list(c))
        if not r1:
            raise ZeroDivisionError("division by zero in number field")
        s0, s1 = [], [Fraction(1)]
        while len(r1) > 1:
            q, r = _poly_divmod(r0, r1)
            r0, r1 = r1, r
            prod = _poly_mul(q, s1)
            s0, s1 = s1, _poly_sub(s0, prod)
            if not r1:
                raise ZeroDivisionError("modulus is not irreducible")
        inv = [x / r1[0] for x in s1]
        return self.reduce(inv)


def _poly_mul(a, b):
    if not a or not b:
        return []
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _poly_sub(a, b):
    n = max(len(a), len(b))
    a = list(a) + [Fraction(0)] * (n - len(a))
    b = list(b) + [Fraction(0)] * (n - len(b))
    return _trim([x - y for x, y in zip(a, b)])


@total_ordering
class AlgebraicNumber:
    __slots__ = ("field", "coeffs")

    def __init__(self, field: NumberField, coeffs: tuple[Fraction, ...]):
        self.field = field
        self.coeffs = coeffs

    def _lift(self, other) -> "AlgebraicNumber | None":
        if isinstance(other, AlgebraicNumber):
            if other.field is not self.field:
                raise ValueError("mixing elements of different number fields")
            return other
        if isinstance(other, (int, Fraction)):
            return self.field.element([other])
        return None

    def __add__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return AlgebraicNumber(self.field, tuple(x + y for x, y in zip(self.coeffs, o.coeffs)))

    __radd__ = __add__

    def __neg__(self):
        return AlgebraicNumber(self.field, tuple(-x for x in self.coeffs))

    def __sub__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return AlgebraicNumber(self.field, self.field.reduce(_poly_mul(list(self.coeffs), list(o.coeffs))))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self * AlgebraicNumber(self.field, self.field.inverse(o.coeffs))

    def __rtruediv__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return o / self

    def __pow__(self, k: int):
        if k < 0:
            return (1 / self) ** (-k)
        out = self.field.element([1])
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __abs__(self):
        return -self if self < 0 else self

    def __float__(self) -> float:
        return float(sum(float(c) * p for c, p in zip(self.coeffs, self.field._powers)))

    def __eq__(self, other):
        if isinstance(other, float):
            return float(self) == other
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self.coeffs == o.coeffs

    def __lt__(self, other):
        if self == other:
            return False
        return float(self) < float(other)

    def __hash__(self):
        if all(c == 0 for c in self.coeffs[1:]):
            return hash(self.coeffs[0])
        return hash(self.coeffs)

    def __repr__(self):
        terms = [f"{c}*G^{i}" if i else str(c) for i, c in enumerate(self.coeffs) if c]
        return "(" + " + ".join(terms or ["0"]) + ")"


def g_exact(s: int, eta: Fraction):
    """G_s(eta) as an exact number: a Fraction when rational, else a field element."""
    eta = Fraction(eta)
    zc = critical_point(s)
    if not 0 <= eta <= zc:
        raise ValueError(f"eta={eta} outside [0, {zc}]")
    if eta == 0:
        return Fraction(1)
    approx = g_eval(s, eta).value
    x = sympy.Symbol("x")
    poly = sympy.Poly(sympy.Rational(eta.numerator, eta.denominator) * x ** (s + 1) - x + 1, x)
    _, factors = poly.factor_list()
    best, best_err = None, None
    for factor, _ in factors:
        for r in factor.real_roots():
            err = abs(float(r) - approx)
            if best_err is None or err < best_err:
                best, best_err = (factor, r), err
    factor, root = best
    if factor.degree() == 1:
        return Fraction(int(sympy.numer(root)), int(sympy.denom(root)))
    coeffs = [Fraction(int(sympy.numer(c)), int(sympy.denom(c))) for c in reversed(factor.all_coeffs())]
    field = NumberField(coeffs, float(root.evalf(30)))
    return field.generator()
