"""Ballot and Motzkin lattice paths in the upper-right quadrant.

A path runs from a point (a, b) to a point (c, d), one unit to the right per
step; the height changes by +1/-1 (ballot) or +1/0/-1 (Motzkin) and must never
drop below zero.
"""
from __future__ import annotations

from fractions import Fraction
from itertools import product
from math import comb
from typing import NamedTuple

ENUMERATION_CAP = 16

BALLOT_STEPS = {"U": 1, "D": -1}
MOTZKIN_STEPS = {"D": -1, "L": 0, "U": 1}


class LatticePoint(NamedTuple):
    x: int
    y: int


def _point(p) -> LatticePoint:
    x, y = p
    if x < 0 or y < 0:
        raise ValueError(f"lattice point {tuple(p)} is outside the quadrant")
    return LatticePoint(int(x), int(y))


def _check_interval(a: LatticePoint, c: LatticePoint) -> None:
    if c.x < a.x:
        raise ValueError(f"reversed interval: target x={c.x} before source x={a.x}")


def binom(top: int, bottom) -> int:
    """Binomial coefficient that is 0 for a non-integral or out-of-range bottom."""
    bottom = Fraction(bottom)
    if bottom.denominator != 1:
        return 0
    k = bottom.numerator
    if top < 0 or k < 0 or k > top:
        return 0
    return comb(top, k)


def count_ballot(source, target) -> int:
    """Number of ballot paths from ``source`` to ``target``."""
    a, b = _point(source)
    c, d = _point(target)
    _check_interval(LatticePoint(a, b), LatticePoint(c, d))
    n = c - a
    return binom(n, Fraction(n - d + b, 2)) - binom(n, Fraction(n + d + b + 2, 2))


def count_motzkin(source, target) -> int:
    """Number of Motzkin paths from ``source`` to ``target``.

    Sums over the number k of level steps: choose their positions, then count
    ballot paths of the remaining n - k steps.
    """
    a, b = _point(source)
    c, d = _point(target)
    _check_interval(LatticePoint(a, b), LatticePoint(c, d))
    n = c - a
    total = 0
    for k in range(n + 1):
        m = n - k
        total += comb(n, k) * (
            binom(m, Fraction(m + d - b, 2)) - binom(m, Fraction(m + b + d + 2, 2))
        )
    return total


def catalan(n: int) -> int:
    return comb(2 * n, n) // (n + 1)


def motzkin_number(n: int) -> int:
    if n < 0:
        raise ValueError("n must be nonnegative")
    total = 0
    for l in range(n // 2 + 1):
        # n! / ((n-2l)! (l+1)! l!) = binom(n, 2l) * Catalan(l)
        total += comb(n, 2 * l) * catalan(l)
    return total


def enumerate_paths(source, target, steps="ballot", cap: int = ENUMERATION_CAP) -> list[str]:
    """All admissible step sequences from ``source`` to ``target``, sorted.

    ``steps`` is "ballot", "motzkin", or a mapping from step letter to height
    change.  Brute force over every sequence, so the span is capped.
    """
    a, b = _point(source)
    c, d = _point(target)
    _check_interval(LatticePoint(a, b), LatticePoint(c, d))
    if isinstance(steps, str):
        steps = {"ballot": BALLOT_STEPS, "motzkin": MOTZKIN_STEPS}[steps]
    n = c - a
    if n > cap:
        raise ValueError(f"span {n} exceeds enumeration cap {cap}")
    letters = sorted(steps)
    found = []
    for seq in product(letters, repeat=n):
        h = b
        for letter in seq:
            h += steps[letter]
            if h < 0:
                break
        else:
            if h == d:
                found.append("".join(seq))
    return found
