"""Central Markov chains on branching graphs.

A chain assigns transition probabilities to the edges of a leveled graph.  It
is central when every path from the root to a given vertex has the same
probability; the marginal at a vertex divided by its dimension is then the
trace weight of the corresponding minimal projection.
"""
from __future__ import annotations

import csv
import io
import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Any, Callable, Hashable

from .exact import AlgebraicNumber, g_exact
from .fusscat import critical_point, g_eval
from .graphs import (
    EndSpec,
    LeveledMultiGraph,
    child_labels,
    dim_between,
    fc_tree,
    motzkin_graph,
    pascalize,
    semi_pascal,
    word_label,
)

FLOAT_TOL = 1e-12
EXACT_TYPES = (int, Fraction, AlgebraicNumber)

Prob = Any  # Fraction, AlgebraicNumber or float


class InvariantViolation(RuntimeError):
    """An internal invariant that should hold for valid inputs failed."""


class NotAMeasureError(ValueError):
    """The recursion produced a negative marginal, so no probability measure exists."""

    def __init__(self, n: int, d: int, value):
        super().__init__(f"marginal at ({n},{d}) is {value} < 0: parameters do not define a central measure")
        self.n, self.d, self.value = n, d, value


def is_exact(x) -> bool:
    return isinstance(x, EXACT_TYPES) and not isinstance(x, bool)


def as_param(x):
    """Keep ints/Fractions exact, turn anything else into a float."""
    if isinstance(x, bool):
        raise TypeError("boolean is not a parameter")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, Fraction):
        return x
    return float(x)


class ChainModel:
    """Transition probabilities on a leveled graph.

    ``kernel(n, v)`` returns {w: probability} for the edges out of level-n
    vertex v, or None when v is unreachable and its transitions are
    undefined.  Results are cached per vertex.
    """

    def __init__(
        self,
        graph: LeveledMultiGraph,
        kernel: Callable[[int, Hashable], dict | None],
        params: dict,
        mode: str,
        name: str,
        walk: "TreeWalk | None" = None,
    ):
        if mode not in ("exact", "float"):
            raise ValueError("mode must be 'exact' or 'float'")
        self.graph = graph
        self.params = params
        self.mode = mode
        self.name = name
        self.walk = walk
        self._kernel = kernel
        self._cache: dict = {}
        self._lock = threading.Lock()

    @property
    def tol(self) -> float:
        return 0 if self.mode == "exact" else FLOAT_TOL

    def __repr__(self) -> str:
        return f"ChainModel({self.name}, {self.params}, mode={self.mode})"

    def transitions(self, n: int, v) -> dict | None:
        key = (n, v)
        if key in self._cache:
            return self._cache[key]
        out = self._kernel(n, v)
        with self._lock:
            self._cache[key] = out
        return out

    def transition(self, n: int, v, w):
        t = self.transitions(n, v)
        if t is None:
            return None
        return t.get(w, 0)


# ---------------------------------------------------------------------------
# Ballot chains on the semi-Pascal graph


def ballot_up_probability(lam, s: int):
    """Probability of stepping from height s to s+1 in the chain M^lambda."""
    if is_exact(lam):
        lam = Fraction(lam)
        if lam == Fraction(1, 2):
            return Fraction(s + 2, 2 * (s + 1))
        mu = 1 - lam
        return (mu ** (s + 2) - lam ** (s + 2)) / (mu ** (s + 1) - lam ** (s + 1))
    lam = float(lam)
    if lam == 1.0:
        return 1.0
    # lam * (x^(s+2) - 1) / (x^(s+1) - 1) with x = (1 - lam)/lam, written with
    # expm1 so that lam near 1/2 does not cancel
    log_x = math.log1p((1 - 2 * lam) / lam)
    if log_x == 0.0:
        return lam * (s + 2) / (s + 1)
    return lam * math.expm1((s + 2) * log_x) / math.expm1((s + 1) * log_x)


def ballot_chain(lam) -> ChainModel:
    """The chain M^lambda on the semi-Pascal graph, 1/2 <= lambda <= 1."""
    lam = as_param(lam)
    if not 0.5 <= lam <= 1:
        raise ValueError(f"lambda={lam} outside [1/2, 1]")
    exact = is_exact(lam)
    one = Fraction(1) if exact else 1.0

    def kernel(n: int, s: int) -> dict:
        if s == 0:
            return {1: one}
        up = ballot_up_probability(lam, s)
        return {s + 1: up, s - 1: one - up}

    return ChainModel(
        semi_pascal(), kernel, {"lambda": lam}, "exact" if exact else "float", "ballot"
    )


def constant_up_chain(p) -> ChainModel:
    """Non-central control: up with probability p off the axis, always up on it."""
    p = as_param(p)
    exact = is_exact(p)
    one = Fraction(1) if exact else 1.0

    def kernel(n: int, s: int) -> dict:
        if s == 0:
            return {1: one}
        return {s + 1: p, s - 1: one - p}

    return ChainModel(semi_pascal(), kernel, {"p": p}, "exact" if exact else "float", "constant-up")


# ---------------------------------------------------------------------------
# Motzkin chains


def motzkin_root_marginal(n: int, l1, l2):
    """v_{n,0}: probability that the random Motzkin path is at height 0 at step n."""
    l3 = 1 - l1 - l2
    total = 0
    for l in range(n // 2 + 1):
        coef = factorial(n) // (factorial(n - 2 * l) * factorial(l + 1) * factorial(l))
        total += coef * (l1 * l2) ** l * l3 ** (n - 2 * l)
    return total


def motzkin_is_central(l1, l2) -> bool:
    """Whether (l1, l2) lies on the curve l1*l2 = (1 - l1 - l2)^2.

    Exactly these parameters yield nonnegative marginals at every level: the
    path measure is then a product of step weights (l1 up, l2 down, l3 level),
    which is central only when up*down = level^2.
    """
    l1, l2 = as_param(l1), as_param(l2)
    l3 = 1 - l1 - l2
    if is_exact(l1) and is_exact(l2):
        return l1 * l2 == l3 * l3
    return math.isclose(l1 * l2, l3 * l3, rel_tol=0, abs_tol=1e-12)


def motzkin_curve_point(t) -> tuple:
    """The point (c t, c / t) of the central curve, with c = t/(t^2 + t + 1), t >= 1.

    t = 1 gives (1/3, 1/3); t -> infinity tends to (1, 0).  Pass t = math.inf
    (or None) for the endpoint.
    """
    if t is None or t == math.inf:
        return (Fraction(1), Fraction(0))
    t = as_param(t)
    if t < 1:
        raise ValueError("curve parameter must be at least 1")
    c = t / (t * t + t + 1)
    return (c * t, c / t)


def _check_unit_region(l1, l2) -> None:
    if l1 < 0 or l2 < 0 or l1 + l2 > 1:
        raise ValueError(f"({l1}, {l2}) outside the region l1, l2 >= 0, l1 + l2 <= 1")


def motzkin_chain(l1, l2, *, strict: bool = True) -> ChainModel:
    """The chain on the Motzkin graph determined by the root marginals v_{n,0}.

    Rows of marginals are built level by level: v_{n,0} from its closed form,
    the rest from row normalization at every vertex of level n-1.  Transitions
    are p((n-1,d) -> (n,e)) = v_{n,e} m_{n-1,d} / (v_{n-1,d} m_{n,e}).

    The pair is unordered and canonicalized to l1 >= l2.  With ``strict`` a
    negative marginal raises NotAMeasureError; this happens for every pair
    off the curve checked by ``motzkin_is_central``.  With ``strict=False``
    the signed table is built anyway, for diagnostics.
    """
    l1, l2 = as_param(l1), as_param(l2)
    _check_unit_region(l1, l2)
    if l2 > l1:
        l1, l2 = l2, l1
    exact = is_exact(l1) and is_exact(l2)
    if not exact:
        l1, l2 = float(l1), float(l2)
    graph = motzkin_graph()
    rows: list[list] = [[Fraction(1) if exact else 1.0]]
    lock = threading.Lock()
    neg_tol = 0 if exact else -FLOAT_TOL

    def row(n: int) -> list:
        if n < len(rows):
            return rows[n]
        with lock:
            while len(rows) <= n:
                m = len(rows)
                prev, dims_prev, dims = rows[m - 1], graph.dims(m - 1), graph.dims(m)
                cur = [motzkin_root_marginal(m, l1, l2)] + [None] * m
                for d in range(m):
                    acc = prev[d] / dims_prev[d]
                    for e in (d - 1, d):
                        if e >= 0:
                            acc -= cur[e] / dims[e]
                    cur[d + 1] = acc * dims[d + 1]
                if strict:
                    for d, x in enumerate(cur):
                        if x < neg_tol:
                            raise NotAMeasureError(m, d, x)
                rows.append(cur)
        return rows[n]

    def kernel(n: int, d: int) -> dict | None:
        prev, cur = row(n)[d], row(n + 1)
        if prev == 0:
            return None
        dims_prev, dims = graph.dims(n), graph.dims(n + 1)
        return {
            e: cur[e] * dims_prev[d] / (prev * dims[e])
            for e in (d - 1, d, d + 1)
            if 0 <= e <= n + 1
        }

    chain = ChainModel(
        graph,
        kernel,
        {"lambda1": l1, "lambda2": l2},
        "exact" if exact else "float",
        "motzkin",
    )
    chain.marginal_row = row  # type: ignore[attr-defined]
    return chain


# ---------------------------------------------------------------------------
# Walks on Fuss-Catalan trees


@dataclass
class TreeWalk:
    """Nearest-neighbour walk on T^s given by the structure constant eta.

    Off the end, stepping toward the end from a label-l vertex has probability
    G^(-l) and stepping to a label-c child has eta G^c.  Along the end the
    forward probabilities are fixed inductively so that each vertex
    normalizes and every edge satisfies p(v,w) p(w,v) = eta.
    """

    s: int
    eta: Any
    G: Any
    derooted: bool
    end: EndSpec | None
    exact: bool
    root_probs: dict | None = None
    forward: list = field(default_factory=list)
    backward: list = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        one = Fraction(1) if self.exact else 1.0
        self.one = one
        self.g_pow = {c: self.G**c for c in range(1, self.s + 1)}
        self.g_inv = {c: one / self.g_pow[c] for c in range(1, self.s + 1)}
        self.away = {c: self.eta * self.g_pow[c] for c in range(1, self.s + 1)}
        self.root_depth = 1 if self.derooted else 0
        self.root = str(self.s) if self.derooted else ""
        self._end_word = ""
        if self.end is not None:
            # no parent above the root of the walk
            self.backward = [0 * one] * (self.root_depth + 1)
            self.forward = [None] * self.root_depth

    def end_word(self, depth: int) -> str:
        if len(self._end_word) < depth:
            self._end_word = self.end.word(max(depth, 2 * len(self._end_word)))
        return self._end_word[:depth]

    def on_end(self, word: str) -> bool:
        return self.end is not None and word == self.end_word(len(word))

    def _extend(self, depth: int) -> None:
        """Fill forward[j] = p(t_j, t_j+1) and backward[j+1] for j <= depth."""
        with self._lock:
            while len(self.forward) <= depth:
                j = len(self.forward)
                nxt = self.end.letter(j + 1)
                off = sum(
                    (self.away[c] for c in child_labels(self.s, self.end.letter(j)) if c != nxt),
                    0 * self.one,
                )
                fwd = self.one - self.backward[j] - off
                if not (0 < fwd <= 1):
                    raise InvariantViolation(f"forward probability {fwd} at depth {j} leaves (0, 1]")
                self.forward.append(fwd)
                self.backward.append(self.eta / fwd)

    def step(self, word: str) -> dict:
        """Transition probabilities from the tree vertex ``word``."""
        depth = len(word)
        label = word_label(word)
        children = [word + str(c) for c in child_labels(self.s, label)]
        if self.root_probs is not None and depth == self.root_depth:
            return {w: self.root_probs[word_label(w)] for w in children}
        out = {}
        if self.on_end(word):
            self._extend(depth)
            if depth > self.root_depth:
                out[word[:-1]] = self.backward[depth]
            nxt = str(self.end.letter(depth + 1))
            for w in children:
                out[w] = self.forward[depth] if w[-1] == nxt else self.away[int(w[-1])]
            return out
        if depth > self.root_depth:
            out[word[:-1]] = self.g_inv[label]
        for w in children:
            out[w] = self.away[int(w[-1])]
        return out


def _eta_and_g(eta, s: int, lower_open: bool):
    eta = as_param(eta)
    zc = critical_point(s)
    if eta > zc or eta < 0 or (lower_open and eta == 0):
        bound = "(0" if lower_open else "[0"
        raise ValueError(f"eta={eta} outside {bound}, {zc}]")
    if is_exact(eta):
        return eta, g_exact(s, eta), True
    return eta, g_eval(s, eta).value, False


def _tree_chain(walk: TreeWalk, params: dict, name: str) -> ChainModel:
    graph = pascalize(fc_tree(walk.s, derooted=walk.derooted))
    return ChainModel(
        graph,
        lambda n, v: walk.step(v),
        params,
        "exact" if walk.exact else "float",
        name,
        walk=walk,
    )


def fib_walk(end: EndSpec | str | None = None, eta=Fraction(1, 10), s: int = 2, derooted: bool = False) -> ChainModel:
    """The central walk on T^s converging to ``end`` with structure constant eta.

    The chain lives on the pascalization of the tree; rooted paths there are
    the walks on the tree.  ``eta`` given as an int or Fraction gives exact
    probabilities (Fractions, or number-field elements when G(eta) is
    irrational).
    """
    if end is None:
        end = EndSpec.ray(s)
    elif isinstance(end, str):
        end = EndSpec.parse(end, s)
    if end.s != s:
        raise ValueError("end and tree order disagree")
    eta, G, exact = _eta_and_g(eta, s, lower_open=False)
    walk = TreeWalk(s, eta, G, derooted, end, exact)
    params = {"end": str(end), "eta": eta, "s": s, "derooted": derooted}
    return _tree_chain(walk, params, "fib-walk")


def aux_walk(eta) -> ChainModel:
    """Walk on the derooted Fibonacci tree with no end.

    From the root it moves to the label-1 child with probability 1/(1+G) and
    to the label-2 child with G/(1+G); elsewhere it uses the off-end rule.
    """
    eta, G, exact = _eta_and_g(eta, 2, lower_open=True)
    one = Fraction(1) if exact else 1.0
    root_probs = {1: one / (1 + G), 2: G / (1 + G)}
    walk = TreeWalk(2, eta, G, True, None, exact, root_probs=root_probs)
    return _tree_chain(walk, {"eta": eta, "s": 2}, "aux-walk")


def crossing_products(chain: ChainModel, depth: int) -> list[tuple[str, str, Any]]:
    """p(v,w) p(w,v) for every tree edge (v parent of w) with w at depth <= ``depth``."""
    walk = chain.walk
    if walk is None:
        raise ValueError("crossing products are defined for tree walks")
    tree = fc_tree(walk.s, derooted=walk.derooted)
    out = []
    for k in range(depth - walk.root_depth):
        for v in tree.level(k):
            pv = walk.step(v)
            for w in tree.children_of(k, v):
                out.append((v, w, pv[w] * walk.step(w)[v]))
    return out


# ---------------------------------------------------------------------------
# Verification and derived quantities


@dataclass
class CentralityReport:
    passed: bool
    n_max: int
    max_spread: Any
    worst_vertex: tuple | None
    vertices_checked: int
    paths_checked: int
    failures: list = field(default_factory=list)
    invalid: list = field(default_factory=list)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = (
            f"{status}: max spread {self.max_spread} over {self.vertices_checked} vertices "
            f"and {self.paths_checked} paths to level {self.n_max}"
        )
        if self.worst_vertex is not None and not self.passed:
            text += f"; worst at {self.worst_vertex}"
        if self.invalid:
            text += f"; {len(self.invalid)} invalid transition rows"
        return text


def _check_row(chain: ChainModel, n: int, v, trans: dict) -> str | None:
    allowed = chain.graph.children_of(n, v)
    extra = set(trans) - set(allowed)
    if extra:
        return f"({n},{v!r}) moves to non-neighbours {sorted(map(str, extra))}"
    total = 0
    for w, p in trans.items():
        if p < 0 or p > 1:
            return f"({n},{v!r}) -> {w!r} has probability {p} outside [0, 1]"
        total += p
    off = total != 1 if chain.mode == "exact" else abs(float(total) - 1) > chain.tol
    if off:
        return f"({n},{v!r}) outgoing probabilities sum to {total}"
    return None


def verify_centrality(chain: ChainModel, n_max: int, tol=None, *, enumerate_paths: bool = False) -> CentralityReport:
    """Check that all rooted paths to each vertex up to ``n_max`` are equally likely.

    By default the extreme path probabilities at each vertex are propagated
    level by level, which covers every path; ``enumerate_paths`` walks the
    paths one by one instead.  Every transition row on the way is checked to
    be a probability vector.  Rows from unreachable vertices are skipped.
    """
    if tol is None:
        tol = chain.tol
    g = chain.graph
    invalid: list[str] = []
    lo: dict = {g.root: 1}
    hi: dict = {g.root: 1}
    levels_lo, levels_hi = [lo], [hi]
    for n in range(n_max):
        nlo: dict = {}
        nhi: dict = {}
        for v in g.level(n):
            if v not in lo:
                continue
            trans = chain.transitions(n, v)
            if trans is None:
                if hi[v] != 0:
                    invalid.append(f"({n},{v!r}) has positive probability but no transitions")
                continue
            problem = _check_row(chain, n, v, trans)
            if problem:
                invalid.append(problem)
            for w, mu in g.children_of(n, v).items():
                p = trans.get(w, 0)
                a, b = lo[v] * p, hi[v] * p
                if a > b:
                    a, b = b, a
                nlo[w] = a if w not in nlo else min(nlo[w], a)
                nhi[w] = b if w not in nhi else max(nhi[w], b)
        lo, hi = nlo, nhi
        levels_lo.append(lo)
        levels_hi.append(hi)

    if enumerate_paths:
        levels_lo, levels_hi = _enumerate_extremes(chain, n_max)

    failures = []
    worst, worst_vertex = 0, None
    vertices = 0
    for n in range(n_max + 1):
        for v, a in levels_lo[n].items():
            vertices += 1
            spread = levels_hi[n][v] - a
            if spread > worst:
                worst, worst_vertex = spread, (n, v)
            if spread > tol:
                failures.append((n, v, a, levels_hi[n][v]))
    paths = sum(sum(g.dims(n).values()) for n in range(n_max + 1))
    return CentralityReport(
        passed=not failures and not invalid,
        n_max=n_max,
        max_spread=worst,
        worst_vertex=worst_vertex,
        vertices_checked=vertices,
        paths_checked=paths,
        failures=failures,
        invalid=invalid,
    )


def _enumerate_extremes(chain: ChainModel, n_max: int):
    g = chain.graph
    lows: list[dict] = [dict() for _ in range(n_max + 1)]
    highs: list[dict] = [dict() for _ in range(n_max + 1)]

    def visit(n: int, v, prob):
        lows[n][v] = prob if v not in lows[n] else min(lows[n][v], prob)
        highs[n][v] = prob if v not in highs[n] else max(highs[n][v], prob)
        if n == n_max:
            return
        trans = chain.transitions(n, v) or {}
        for w, mu in g.children_of(n, v).items():
            p = trans.get(w, 0)
            for _ in range(mu):
                visit(n + 1, w, prob * p)

    visit(0, g.root, 1)
    return lows, highs


def marginals(chain: ChainModel, n: int) -> list[dict]:
    """Distribution of the chain's position at each level 0..n."""
    g = chain.graph
    table = [{g.root: 1}]
    for m in range(n):
        cur: dict = {}
        for v, mass in table[-1].items():
            if mass == 0:
                continue
            trans = chain.transitions(m, v)
            if trans is None:
                raise InvariantViolation(f"({m},{v!r}) carries mass but has no transitions")
            for w, p in trans.items():
                cur[w] = cur.get(w, 0) + mass * p
        table.append(cur)
    return table


def trace_weights(chain: ChainModel, n: int) -> dict:
    """nu(X_n = v) / dim(v) for each vertex v of level n."""
    dims = chain.graph.dims(n)
    mass = marginals(chain, n)[n]
    out = {}
    for v, d in dims.items():
        m = mass.get(v, 0)
        out[v] = m / d if chain.mode == "exact" and not isinstance(m, float) else float(m) / d
    return out


def ergodic_estimate(graph: LeveledMultiGraph, tail, edge) -> list[float | None]:
    """Ratios dim(w, omega_i) / dim(v, omega_i) along a tail of vertices.

    ``tail`` is a sequence of (level, key) vertices and ``edge`` a pair of
    vertices (v, w) with w one level above v.  Unreachable tail vertices give
    None.
    """
    v, w = edge
    out: list[float | None] = []
    for omega in tail:
        den = dim_between(graph, v, omega)
        if den == 0:
            out.append(None)
            continue
        out.append(float(Fraction(dim_between(graph, w, omega), den)))
    return out


def ballot_tail(lam: float, levels) -> list[tuple[int, int]]:
    """Semi-Pascal vertices (N, S) with (N + S) / 2N close to lambda."""
    tail = []
    for n in levels:
        s = round((2 * lam - 1) * n)
        if (n - s) % 2:
            s += 1 if s < n else -1
        tail.append((n, max(0, min(n, s))))
    return tail


# ---------------------------------------------------------------------------
# Export


def _prob_fields(p) -> dict:
    if isinstance(p, Fraction):
        return {"p_num": p.numerator, "p_den": p.denominator, "p_float": float(p)}
    if isinstance(p, AlgebraicNumber):
        return {"p_exact": repr(p), "p_float": float(p)}
    return {"p_float": float(p)}


def transition_table(chain: ChainModel, n_max: int) -> list[dict]:
    rows = []
    for n in range(n_max):
        for v in chain.graph.level(n):
            trans = chain.transitions(n, v)
            if trans is None:
                continue
            for w, p in trans.items():
                rows.append({"level": n, "from": v, "to": w, **_prob_fields(p)})
    return rows


def rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: row.get(c, "") for c in columns})
    return buf.getvalue()


def transition_csv(chain: ChainModel, n_max: int) -> str:
    if chain.mode == "exact":
        columns = ["level", "from", "to", "p_num", "p_den", "p_exact", "p_float"]
    else:
        columns = ["level", "from", "to", "p_float"]
    return rows_to_csv(transition_table(chain, n_max), columns)
