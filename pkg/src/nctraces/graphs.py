"""Leveled multigraphs, pascalization and the concrete branching graphs.

Vertices are identified by (level, key).  Keys are ints for the half-line,
the semi-Pascal graph and the Motzkin graph, label strings for tree vertices
("" is the root, "2" its child, "21" a grandchild, ...) and a/b strings for
the subword graph.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Mapping, NamedTuple

from .paths import count_ballot, count_motzkin

Key = Hashable
EdgeMap = Mapping[Key, int]


class PVertex(NamedTuple):
    n: int
    key: Key


class LeveledMultiGraph:
    """An N-graded rooted graph with edge multiplicities between adjacent levels.

    ``children(n, v)`` returns {w: multiplicity} for the edges from level-n
    vertex v up to level n+1.  Levels are discovered lazily from the root
    unless ``level_fn`` lists them directly.  ``parents`` is optional; without
    it the reverse edges are recovered from the previous level.
    """

    def __init__(
        self,
        root: Key,
        children: Callable[[int, Key], EdgeMap],
        *,
        parents: Callable[[int, Key], EdgeMap] | None = None,
        level_fn: Callable[[int], list] | None = None,
        horizon: int | None = None,
        name: str = "graph",
        path_count: Callable[[int, Key, int, Key], int] | None = None,
    ):
        self.root = root
        self.name = name
        self.horizon = horizon
        self.path_count = path_count
        self._children_fn = children
        self._parents_fn = parents
        self._level_fn = level_fn
        self._levels: list[list] = [[root]]
        self._level_sets: list[set] = [{root}]
        self._children: dict[tuple[int, Key], dict] = {}
        self._parents: dict[tuple[int, Key], dict] = {}
        self._dims: list[dict] = [{root: 1}]
        self._lock = threading.RLock()

    def __repr__(self) -> str:
        return f"LeveledMultiGraph({self.name!r}, materialized={len(self._levels) - 1})"

    def _check_level(self, n: int) -> None:
        if n < 0:
            raise ValueError("levels are nonnegative")
        if self.horizon is not None and n > self.horizon:
            raise ValueError(f"level {n} is beyond the horizon {self.horizon} of {self.name}")

    def level(self, n: int) -> list:
        self._check_level(n)
        if n < len(self._levels):
            return self._levels[n]
        with self._lock:
            while len(self._levels) <= n:
                m = len(self._levels)
                if self._level_fn is not None:
                    keys = list(self._level_fn(m))
                else:
                    keys, seen = [], set()
                    for v in self._levels[m - 1]:
                        for w in self.children_of(m - 1, v):
                            if w not in seen:
                                seen.add(w)
                                keys.append(w)
                self._level_sets.append(set(keys))
                self._levels.append(keys)
        return self._levels[n]

    def levels(self, n_max: int) -> list[list]:
        self.level(n_max)
        return self._levels[: n_max + 1]

    def level_sizes(self, n_max: int) -> list[int]:
        return [len(lv) for lv in self.levels(n_max)]

    def has_vertex(self, n: int, v: Key) -> bool:
        return v in self._level_sets[n] if n < len(self._levels) else v in set(self.level(n))

    def children_of(self, n: int, v: Key) -> dict:
        """Edges from (n, v) up to level n+1, as {w: multiplicity}."""
        cached = self._children.get((n, v))
        if cached is not None:
            return cached
        if self.horizon is not None and n >= self.horizon:
            out = {}
        else:
            out = {w: m for w, m in self._children_fn(n, v).items() if m}
        with self._lock:
            self._children[(n, v)] = out
        return out

    def parents_of(self, n: int, w: Key) -> dict:
        """Edges from level n-1 into (n, w), as {v: multiplicity}."""
        if n == 0:
            return {}
        cached = self._parents.get((n, w))
        if cached is not None:
            return cached
        if self._parents_fn is not None:
            out = {v: m for v, m in self._parents_fn(n, w).items() if m}
            with self._lock:
                self._parents[(n, w)] = out
            return out
        with self._lock:
            rev: dict[Key, dict] = {x: {} for x in self.level(n)}
            for v in self.level(n - 1):
                for x, m in self.children_of(n - 1, v).items():
                    rev.setdefault(x, {})[v] = m
            for x, edges in rev.items():
                self._parents[(n, x)] = edges
        return self._parents.get((n, w), {})

    def mult(self, n: int, v: Key, w: Key) -> int:
        """Number of edges between level-n vertex v and level-(n+1) vertex w."""
        return self.children_of(n, v).get(w, 0)

    def edges(self, n: int) -> list[tuple[Key, Key, int]]:
        return [(v, w, m) for v in self.level(n) for w, m in self.children_of(n, v).items()]

    def dims(self, n: int) -> dict:
        """dim(root, (n, v)) for every vertex v of level n."""
        self._check_level(n)
        if n < len(self._dims):
            return self._dims[n]
        with self._lock:
            while len(self._dims) <= n:
                m = len(self._dims)
                prev = self._dims[m - 1]
                cur = {w: 0 for w in self.level(m)}
                for v, dv in prev.items():
                    for w, mu in self.children_of(m - 1, v).items():
                        cur[w] += mu * dv
                self._dims.append(cur)
        return self._dims[n]


def _as_pvertex(v) -> PVertex:
    n, key = v
    return PVertex(int(n), key)


def dim_between(g: LeveledMultiGraph, v, w, *, closed_form: bool = True) -> int:
    """Number of paths in ``g`` from vertex v = (n, key) to vertex w = (m, key).

    Uses the graph's closed-form path counter when it has one, otherwise a
    backward dynamic program over the cone below w.
    """
    v, w = _as_pvertex(v), _as_pvertex(w)
    if w.n < v.n:
        raise ValueError("target level is below source level")
    if closed_form and g.path_count is not None:
        return g.path_count(v.n, v.key, w.n, w.key)
    if not g.has_vertex(w.n, w.key) or not g.has_vertex(v.n, v.key):
        return 0
    if v.n == w.n:
        return int(v.key == w.key)
    if v.n == 0 and w.n < len(g._dims):
        return g._dims[w.n][w.key]
    layer = {w.key: 1}
    for m in range(w.n, v.n, -1):
        nxt: dict[Key, int] = {}
        for x, c in layer.items():
            for u, mu in g.parents_of(m, x).items():
                nxt[u] = nxt.get(u, 0) + mu * c
        layer = nxt
        if not layer:
            return 0
    return layer.get(v.key, 0)


def dim_table(
    g: LeveledMultiGraph, n_max: int, keep: Callable[[int, Key], bool] | None = None
) -> list[dict]:
    """Forward path counts from the root, level by level, up to ``n_max``.

    ``keep(n, key)`` prunes vertices; counts at kept vertices are exact only
    when every path reaching them stays inside the kept region.
    """
    if keep is None:
        return [g.dims(n) for n in range(n_max + 1)]
    table = [{g.root: 1}]
    for n in range(n_max):
        cur: dict[Key, int] = {}
        for v, dv in table[-1].items():
            for w, mu in g.children_of(n, v).items():
                if keep(n + 1, w):
                    cur[w] = cur.get(w, 0) + mu * dv
        table.append(cur)
    return table


# ---------------------------------------------------------------------------
# Builders


def half_line() -> LeveledMultiGraph:
    return LeveledMultiGraph(
        0,
        lambda n, v: {v + 1: 1},
        parents=lambda n, v: {v - 1: 1} if v > 0 else {},
        level_fn=lambda n: [n],
        name="half-line",
    )


def pascalize(g: LeveledMultiGraph, *, name: str | None = None) -> LeveledMultiGraph:
    """Pascalization: level n holds the vertices of g at depth k <= n, k = n mod 2.

    Keys of g must be distinct across levels; the pascalized vertex (n, v)
    keeps the key v.
    """
    depth: dict[Key, int] = {}
    lock = threading.Lock()

    def register(k: int, keys: Iterable[Key]) -> None:
        with lock:
            for key in keys:
                old = depth.setdefault(key, k)
                if old != k:
                    raise ValueError(f"key {key!r} appears at depths {old} and {k}")

    def level_fn(n: int) -> list:
        keys = []
        for k in range(n % 2, n + 1, 2):
            lv = g.level(k)
            register(k, lv)
            keys.extend(lv)
        return keys

    def depth_of(n: int, v: Key) -> int:
        if v not in depth:
            level_fn(n)  # registers every key that can appear at level n
        if v not in depth:
            raise KeyError(f"{v!r} is not a vertex of level {n}")
        return depth[v]

    def children(n: int, v: Key) -> dict:
        k = depth_of(n, v)
        down = g.children_of(k, v)
        up = g.parents_of(k, v)
        register(k + 1, down)
        register(k - 1, up)
        out = dict(down)
        for u, m in up.items():
            out[u] = out.get(u, 0) + m
        return out

    def parents(n: int, w: Key) -> dict:
        k = depth_of(n, w)
        out = dict(g.parents_of(k, w))
        if k + 1 <= n - 1:
            for u, m in g.children_of(k, w).items():
                out[u] = out.get(u, 0) + m
        return out

    register(0, [g.root])
    p = LeveledMultiGraph(
        g.root,
        children,
        parents=parents,
        level_fn=level_fn,
        name=name or f"pascalized {g.name}",
    )
    p.depth = depth  # type: ignore[attr-defined]
    p.base = g  # type: ignore[attr-defined]
    return p


def semi_pascal() -> LeveledMultiGraph:
    """Vertices (m, s) with s <= m, s = m mod 2; edges change s by one."""
    g = pascalize(half_line(), name="semi-Pascal")
    g.path_count = lambda n, s, m, t: count_ballot((n, s), (m, t))
    return g


def motzkin_graph() -> LeveledMultiGraph:
    """Vertices (n, d), 0 <= d <= n; single edges when d changes by at most one."""
    return LeveledMultiGraph(
        0,
        lambda n, d: {e: 1 for e in (d - 1, d, d + 1) if 0 <= e <= n + 1},
        parents=lambda n, d: {e: 1 for e in (d - 1, d, d + 1) if 0 <= e <= n - 1},
        level_fn=lambda n: list(range(n + 1)),
        name="Motzkin",
        path_count=lambda n, d, m, e: count_motzkin((n, d), (m, e)),
    )


MAX_TREE_ORDER = 9


def child_labels(s: int, label: int) -> range:
    """Labels of the children of a label-``label`` vertex: s, s-1, ..., s-label+1."""
    return range(s, s - label, -1)


def fc_tree(s: int = 2, derooted: bool = False) -> LeveledMultiGraph:
    """The s-Fuss-Catalan tree.

    Vertices are label words; the root "" has label 1.  The derooted tree is
    rooted at the word "s" (the unique level-1 vertex of the full tree).
    """
    if s < 2:
        raise ValueError("tree order s must be at least 2")
    if s > MAX_TREE_ORDER:
        raise ValueError(f"tree order s must be at most {MAX_TREE_ORDER} (one digit per label)")
    root = str(s) if derooted else ""
    base = len(root)

    def children(n: int, w: str) -> dict:
        return {w + str(c): 1 for c in child_labels(s, word_label(w))}

    def parents(n: int, w: str) -> dict:
        return {w[:-1]: 1} if len(w) > base else {}

    g = LeveledMultiGraph(
        root,
        children,
        parents=parents,
        name=f"{'derooted ' if derooted else ''}T^{s}",
    )
    g.s = s  # type: ignore[attr-defined]
    g.derooted = derooted  # type: ignore[attr-defined]
    return g


def even_contraction(g: LeveledMultiGraph) -> LeveledMultiGraph:
    """Graph of even levels: one edge per two-step path of ``g``."""

    def children(n: int, v: Key) -> dict:
        out: dict[Key, int] = {}
        for u, m1 in g.children_of(2 * n, v).items():
            for w, m2 in g.children_of(2 * n + 1, u).items():
                out[w] = out.get(w, 0) + m1 * m2
        return out

    def parents(n: int, w: Key) -> dict:
        out: dict[Key, int] = {}
        for u, m2 in g.parents_of(2 * n, w).items():
            for v, m1 in g.parents_of(2 * n - 1, u).items():
                out[v] = out.get(v, 0) + m1 * m2
        return out

    return LeveledMultiGraph(
        g.root,
        children,
        parents=parents,
        level_fn=lambda n: g.level(2 * n),
        horizon=None if g.horizon is None else g.horizon // 2,
        name=f"even levels of {g.name}",
    )


def beta(n: int) -> str:
    """The alternating word abab... of length n."""
    return ("ab" * (n // 2 + 1))[:n]


def distinct_subwords(word: str) -> set[str]:
    subs = {""}
    for letter in word:
        subs |= {x + letter for x in subs}
    return subs


def _word_order(w: str) -> tuple[int, str]:
    return (len(w), w)


def bsharp_graph(n_max: int) -> LeveledMultiGraph:
    """The graph whose level n consists of the distinct subwords of beta(n).

    From an even level, u connects to w = u, w = ua, or w with u = wb; from an
    odd level, u connects to w = u, w = ub, or w with u = wa.
    """
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    levels = [sorted(distinct_subwords(beta(n)), key=_word_order) for n in range(n_max + 1)]
    sets = [set(lv) for lv in levels]

    def candidates(n: int, u: str) -> list[str]:
        grow, shrink = ("a", "b") if n % 2 == 0 else ("b", "a")
        out = [u, u + grow]
        if u.endswith(shrink):
            out.append(u[:-1])
        return out

    def children(n: int, u: str) -> dict:
        return {w: 1 for w in candidates(n, u) if w in sets[n + 1]}

    return LeveledMultiGraph(
        "",
        children,
        level_fn=lambda n: levels[n],
        horizon=n_max,
        name="B#",
    )


# ---------------------------------------------------------------------------
# Words and ends

AB_TO_LABEL = {"a": "2", "b": "1"}
LABEL_TO_AB = {"2": "a", "1": "b"}


def to_labels(word: str) -> str:
    """Accept a/b letters for s=2 words and return the label string."""
    if any(ch in "ab" for ch in word):
        return "".join(AB_TO_LABEL[ch] for ch in word)
    return word


def to_ab(word: str) -> str:
    return "".join(LABEL_TO_AB[ch] for ch in word)


def word_label(w: str) -> int:
    """Label of the vertex named by w; the root has label 1."""
    return int(w[-1]) if w else 1


def is_admissible(word: str, s: int = 2, start_label: int = 1) -> bool:
    """Whether ``word`` is a path of labels starting below a vertex of label ``start_label``."""
    prev = start_label
    for ch in word:
        if not ch.isdigit():
            return False
        c = int(ch)
        if not s - prev + 1 <= c <= s:
            return False
        prev = c
    return True


def check_word(word: str, s: int = 2) -> str:
    w = to_labels(word)
    if not is_admissible(w, s):
        raise ValueError(f"{word!r} is not an admissible word for s={s}")
    return w


def common_prefix(v: str, w: str) -> str:
    """Longest common prefix of two tree words (their deepest common ancestor)."""
    k = 0
    for x, y in zip(v, w):
        if x != y:
            break
        k += 1
    return v[:k]


def label_sum(w: str, s: int = 2) -> int:
    """r(w) = 1 + sum of the labels along w."""
    w = check_word(w, s)
    return 1 + sum(int(ch) for ch in w)


@dataclass(frozen=True)
class EndSpec:
    """An eventually periodic end prefix.period.period... of the tree T^s."""

    prefix: str
    period: str
    s: int = 2

    def __post_init__(self):
        object.__setattr__(self, "prefix", to_labels(self.prefix))
        object.__setattr__(self, "period", to_labels(self.period))
        if not self.period:
            raise ValueError("the period of an end must be nonempty")
        # prefix, then the period twice, covers every junction
        probe = self.prefix + self.period * 2
        if not is_admissible(probe, self.s):
            raise ValueError(
                f"end {self.prefix}:{self.period} is not admissible for s={self.s}"
            )

    @classmethod
    def parse(cls, text: str, s: int = 2) -> "EndSpec":
        """Parse "prefix:period"; a string without a colon is a pure period."""
        if ":" in text:
            prefix, period = text.split(":", 1)
        else:
            prefix, period = "", text
        return cls(prefix, period, s)

    @classmethod
    def ray(cls, s: int = 2) -> "EndSpec":
        return cls("", str(s), s)

    def letter(self, k: int) -> int:
        """Label of t_k, the depth-k vertex of the end (t_0 is the root, label 1)."""
        if k == 0:
            return 1
        if k <= len(self.prefix):
            return int(self.prefix[k - 1])
        i = (k - len(self.prefix) - 1) % len(self.period)
        return int(self.period[i])

    def word(self, k: int) -> str:
        """The word t_k."""
        return "".join(str(self.letter(i)) for i in range(1, k + 1))

    def label_sum(self, k: int) -> int:
        """r(t_k)."""
        return 1 + sum(self.letter(i) for i in range(1, k + 1))

    def __str__(self) -> str:
        return f"{self.prefix}:{self.period}"


def phi_map(word: str) -> str:
    """Relabel a derooted Fibonacci word (leading letter removed) as a subword of beta.

    Letters a at even positions (counting from 1) become b, letters b are
    deleted, and the remaining a's stay.
    """
    w = word
    if any(ch in "12" for ch in w):
        w = to_ab(w)
    if any(ch not in "ab" for ch in w):
        raise ValueError(f"{word!r} is not a word over a/b")
    # below the derooted root (an a), a b must be followed by an a
    if not is_admissible("2" + to_labels(w), 2):
        raise ValueError(f"{word!r} is not an admissible derooted Fibonacci word")
    out = []
    for i, ch in enumerate(w, start=1):
        if ch == "a":
            out.append("b" if i % 2 == 0 else "a")
    return "".join(out)


def bsharp_witness(n: int, key: str) -> str:
    """Image in the subword graph of the pascalized derooted-tree vertex (n, key)."""
    return phi_map(to_ab(key)[1:])


# ---------------------------------------------------------------------------
# Isomorphism


@dataclass
class IsoResult:
    isomorphic: bool
    bijection: list[dict] | None
    failed_level: int | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.isomorphic


def _check_witness(g1, g2, n_max, witness) -> IsoResult:
    maps = []
    for n in range(n_max + 1):
        lv1, lv2 = g1.level(n), g2.level(n)
        if len(lv1) != len(lv2):
            return IsoResult(False, None, n, f"level sizes {len(lv1)} != {len(lv2)}")
        m = {v: witness(n, v) for v in lv1}
        if set(m.values()) != set(lv2):
            return IsoResult(False, None, n, "witness is not a bijection of the level")
        maps.append(m)
    for n in range(n_max):
        for v in g1.level(n):
            image = {maps[n + 1][w]: mu for w, mu in g1.children_of(n, v).items()}
            if image != g2.children_of(n, maps[n][v]):
                return IsoResult(False, None, n, f"edges out of {v!r} are not preserved")
    return IsoResult(True, maps)


def _to_networkx(g: LeveledMultiGraph, n_max: int):
    import networkx as nx

    h = nx.DiGraph()
    for n in range(n_max + 1):
        for v in g.level(n):
            h.add_node((n, v), level=n)
    for n in range(n_max):
        for v, w, m in g.edges(n):
            h.add_edge((n, v), (n + 1, w), mult=m)
    return h


def graphs_isomorphic_up_to(g1, g2, n_max: int, witness=None) -> IsoResult:
    """Level-preserving isomorphism test on levels 0..n_max.

    With a ``witness(n, key1) -> key2`` the candidate map is checked directly.
    Without one, level sizes are compared first and a general matcher decides.
    """
    if witness is None and g1 is g2:
        witness = lambda n, v: v  # noqa: E731
    if witness is not None:
        return _check_witness(g1, g2, n_max, witness)
    for n in range(n_max + 1):
        a, b = len(g1.level(n)), len(g2.level(n))
        if a != b:
            return IsoResult(False, None, n, f"level sizes {a} != {b}")
    from networkx.algorithms.isomorphism import DiGraphMatcher

    matcher = DiGraphMatcher(
        _to_networkx(g1, n_max),
        _to_networkx(g2, n_max),
        node_match=lambda x, y: x["level"] == y["level"],
        edge_match=lambda x, y: x["mult"] == y["mult"],
    )
    if not matcher.is_isomorphic():
        return IsoResult(False, None, None, "no level-preserving isomorphism")
    maps: list[dict] = [{} for _ in range(n_max + 1)]
    for (n, v), (_, w) in matcher.mapping.items():
        maps[n][v] = w
    return IsoResult(True, maps)


# ---------------------------------------------------------------------------
# Export


def _key_text(key: Key) -> str:
    return key if isinstance(key, str) else str(key)


def to_json(g: LeveledMultiGraph, n_max: int) -> dict:
    levels = [[_key_text(v) for v in g.level(n)] for n in range(n_max + 1)]
    edges = [
        [n, _key_text(v), _key_text(w), m] for n in range(n_max) for v, w, m in g.edges(n)
    ]
    return {"name": g.name, "levels": levels, "edges": edges}


def to_dot(g: LeveledMultiGraph, n_max: int) -> str:
    def node(n, v):
        return json.dumps(f"{n}:{_key_text(v)}")

    lines = [f"digraph {json.dumps(g.name)} {{", "  rankdir=TB;"]
    for n in range(n_max + 1):
        lines.append(f"  subgraph level_{n} {{")
        lines.append("    rank=same;")
        for v in g.level(n):
            label = _key_text(v) or "∅"
            lines.append(f"    {node(n, v)} [label={json.dumps(label)}];")
        lines.append("  }")
    for n in range(n_max):
        for v, w, m in g.edges(n):
            lines.append(f"  {node(n, v)} -> {node(n + 1, w)} [label=\"{m}\"];")
    lines.append("}")
    return "\n".join(lines) + "\n"
