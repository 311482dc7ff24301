"""Monte Carlo experiments for chains and tree walks.

Trajectory i always draws from its own stream, seeded by ``derive_seed(seed, i)``,
one uniform per step.  Results for a trajectory therefore do not depend on
how many others are simulated alongside it or in what batches.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.special import gammaln

from .chains import ChainModel, TreeWalk, aux_walk, motzkin_root_marginal
from .fusscat import critical_point, fuss_catalan, g_eval, lln_limit, loop_mean
from .graphs import EndSpec

UNIFORM_BLOCK = 4_000_000  # uniforms held in memory at once
LOOP_CAP = 10**6  # largest half-length tabulated for loop lengths
TAIL_CUTOFF = 1e-12


def derive_seed(seed: int, index: int) -> int:
    """64-bit seed of trajectory ``index`` under master seed ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, index))


def _uniform_blocks(seed: int, count: int, steps: int) -> Iterator[np.ndarray]:
    """Blocks of shape (count, chunk) whose row i continues trajectory i's stream."""
    chunk = max(1, min(steps, UNIFORM_BLOCK // max(count, 1)))
    if chunk >= steps:
        block = np.empty((count, steps))
        for i in range(count):
            block[i] = trajectory_rng(seed, i).random(steps)
        yield block
        return
    gens = [trajectory_rng(seed, i) for i in range(count)]
    done = 0
    while done < steps:
        size = min(chunk, steps - done)
        block = np.empty((count, size))
        for i, g in enumerate(gens):
            block[i] = g.random(size)
        done += size
        yield block


# ---------------------------------------------------------------------------
# Generic sampling


@dataclass
class Trajectory:
    index: int
    seed: int
    vertices: list

    @property
    def length(self) -> int:
        return len(self.vertices) - 1


def _float_probs(trans: dict) -> tuple[list, np.ndarray]:
    keys = list(trans)
    return keys, np.cumsum([float(trans[k]) for k in keys])


def sample_trajectories(chain: ChainModel, steps: int, count: int, seed: int) -> Iterator[Trajectory]:
    """Sample ``count`` independent paths of ``steps`` steps from the root."""
    g = chain.graph
    for i in range(count):
        s_i = derive_seed(seed, i)
        u = np.random.default_rng(s_i).random(steps)
        v = g.root
        path = [v]
        for n in range(steps):
            trans = chain.transitions(n, v)
            if trans is None:
                raise RuntimeError(f"trajectory reached ({n},{v!r}) which has no transitions")
            keys, cdf = _float_probs(trans)
            j = int(np.searchsorted(cdf, u[n], side="right"))
            v = keys[min(j, len(keys) - 1)]
            path.append(v)
        yield Trajectory(i, s_i, path)


def trajectories_csv(trajectories) -> str:
    lines = ["traj_id,step,vertex"]
    for t in trajectories:
        for step, v in enumerate(t.vertices):
            lines.append(f"{t.index},{step},{v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Vectorized tree-walk simulation


class _EndTracker:
    """Length of the common prefix of each walker's position with a fixed end."""

    def __init__(self, end: EndSpec, count: int, depth_cap: int, start: int):
        self.labels = np.array([end.letter(k) for k in range(depth_cap + 2)], dtype=np.int16)
        self.cp = np.full(count, start, dtype=np.int64)

    def moved(self, idx_up, idx_down, depth_before, child_label):
        up = idx_up
        self.cp[up] = np.minimum(self.cp[up], depth_before[up] - 1)
        d = idx_down
        on = self.cp[d] == depth_before[d]
        hit = on & (child_label[d] == self.labels[depth_before[d] + 1])
        self.cp[d[hit]] += 1


class TreeWalkSimulator:
    """Runs many copies of a tree walk in lockstep with numpy."""

    def __init__(self, walk: TreeWalk, count: int, steps: int, seed: int, track: EndSpec | None = None):
        self.walk = walk
        self.count = count
        self.steps = steps
        self.seed = seed
        s = walk.s
        self.depth_cap = walk.root_depth + steps + 1
        self.depth = np.full(count, walk.root_depth, dtype=np.int64)
        self.word = np.zeros((count, self.depth_cap + 2), dtype=np.int8)
        self.word[:, 0] = 1
        if walk.derooted:
            self.word[:, 1] = s
        self.g_inv = np.zeros(s + 1)
        self.away = np.zeros(s + 1)
        for c in range(1, s + 1):
            self.g_inv[c] = float(walk.g_inv[c])
            self.away[c] = float(walk.away[c])
        self.root_probs = None
        if walk.root_probs is not None:
            self.root_probs = np.zeros(s + 1)
            for c, p in walk.root_probs.items():
                self.root_probs[c] = float(p)
        self.own = None
        if walk.end is not None:
            walk._extend(self.depth_cap)
            self.fwd = np.array([0.0 if p is None else float(p) for p in walk.forward[: self.depth_cap + 1]])
            self.bwd = np.array([float(p) for p in walk.backward[: self.depth_cap + 1]])
            self.own = _EndTracker(walk.end, count, self.depth_cap, walk.root_depth)
        self.track = None
        if track is not None:
            if walk.end is not None and track == walk.end:
                self.track = self.own
            else:
                self.track = _EndTracker(track, count, self.depth_cap, walk.root_depth)
        self.time = 0
        self.returns = np.zeros(count, dtype=np.int64)

    def _step(self, u: np.ndarray) -> None:
        walk, s = self.walk, self.walk.s
        idx = np.arange(self.count)
        depth = self.depth
        lab = self.word[idx, depth].astype(np.int64)
        at_root = depth == walk.root_depth
        if self.own is not None:
            on = self.own.cp == depth
            next_label = self.own.labels[np.minimum(depth + 1, self.depth_cap + 1)]
            p_up = np.where(on, self.bwd[depth], self.g_inv[lab])
        else:
            on = np.zeros(self.count, dtype=bool)
            next_label = np.zeros(self.count, dtype=np.int16)
            p_up = self.g_inv[lab]
        p_up = np.where(at_root, 0.0, p_up)
        go_up = u < p_up
        rest = u - p_up
        choice = np.zeros(self.count, dtype=np.int64)  # 0 means up
        undecided = ~go_up
        for slot in range(s):
            label = s - slot
            exists = slot < lab
            p = np.where(on & (next_label == label), self.fwd[depth] if self.own is not None else 0.0, self.away[label])
            if self.root_probs is not None:
                p = np.where(at_root, self.root_probs[label], p)
            take = undecided & exists & ((rest < p) | (slot == lab - 1))
            choice[take] = label
            undecided &= ~take
            rest = rest - np.where(exists, p, 0.0)
        idx_up = np.flatnonzero(go_up)
        idx_down = np.flatnonzero(~go_up)
        before = depth.copy()
        for tracker in {id(t): t for t in (self.own, self.track) if t is not None}.values():
            tracker.moved(idx_up, idx_down, before, choice)
        depth[idx_up] -= 1
        depth[idx_down] += 1
        self.word[idx_down, depth[idx_down]] = choice[idx_down]
        self.time += 1
        self.returns += depth == walk.root_depth

    def run(self, callback=None) -> None:
        """Advance all walkers by ``steps``; ``callback(sim)`` runs after every step."""
        for block in _uniform_blocks(self.seed, self.count, self.steps):
            for col in range(block.shape[1]):
                self._step(block[:, col])
                if callback is not None:
                    callback(self)

    def positions(self) -> list[str]:
        return [
            "".join(str(x) for x in self.word[i, 1 : self.depth[i] + 1]) for i in range(self.count)
        ]


def _require_walk(chain: ChainModel) -> TreeWalk:
    if chain.walk is None:
        raise ValueError("this experiment needs a tree walk (fib_walk or aux_walk)")
    return chain.walk


# ---------------------------------------------------------------------------
# Returns to the root


@dataclass
class ReturnEstimate:
    n: int
    estimate: float
    stderr: float
    exact: float
    count: int

    @property
    def sigma_exact(self) -> float:
        """Binomial standard error under the exact return probability."""
        return math.sqrt(self.exact * (1 - self.exact) / self.count)


def return_probabilities(chain: ChainModel, n_values: Sequence[int], count: int, seed: int) -> list[ReturnEstimate]:
    """Frequencies of being at the root after 2n steps, with exact targets C_n eta^n."""
    walk = _require_walk(chain)
    if walk.derooted or walk.end is None:
        raise ValueError("return probabilities are defined for the rooted walk toward an end")
    n_values = sorted(set(int(n) for n in n_values))
    if not n_values or n_values[0] < 1:
        raise ValueError("n must be at least 1")
    sim = TreeWalkSimulator(walk, count, 2 * n_values[-1], seed)
    hits: dict[int, float] = {}
    targets = {2 * n: n for n in n_values}

    def record(s: TreeWalkSimulator):
        if s.time in targets:
            hits[targets[s.time]] = float(np.mean(s.depth == 0))

    sim.run(record)
    eta = float(walk.eta)
    out = []
    for n in n_values:
        p = hits[n]
        exact = fuss_catalan(walk.s, n) * eta**n
        out.append(ReturnEstimate(n, p, math.sqrt(p * (1 - p) / count), exact, count))
    return out


def empirical_return_probability(chain: ChainModel, n: int, count: int, seed: int) -> ReturnEstimate:
    return return_probabilities(chain, [n], count, seed)[0]


# ---------------------------------------------------------------------------
# Exit times


@dataclass
class ExitTimeRecord:
    traj: int
    k: int
    N_k: int
    r_k: int
    ratio: float
    censored: bool


@dataclass
class ExitTimes:
    """Last-passage times N_k for several k, one row per trajectory."""

    ks: list[int]
    N: np.ndarray  # shape (count, len(ks))
    r: np.ndarray  # r(t_k) for each k
    censored: np.ndarray  # same shape as N
    method: str

    @property
    def count(self) -> int:
        return self.N.shape[0]

    def column(self, k: int) -> int:
        return self.ks.index(k)

    def ratios(self, k: int) -> np.ndarray:
        j = self.column(k)
        return (self.N[:, j] - k) / self.r[j]

    def excess(self, k: int) -> np.ndarray:
        return self.N[:, self.column(k)] - k

    def records(self) -> Iterator[ExitTimeRecord]:
        for i in range(self.count):
            for j, k in enumerate(self.ks):
                n_k = int(self.N[i, j])
                yield ExitTimeRecord(
                    i, k, n_k, int(self.r[j]), (n_k - k) / float(self.r[j]), bool(self.censored[i, j])
                )

    def to_csv(self) -> str:
        lines = ["traj_id,k,N_k,r_k,ratio,censored"]
        for rec in self.records():
            lines.append(f"{rec.traj},{rec.k},{rec.N_k},{rec.r_k},{rec.ratio!r},{int(rec.censored)}")
        return "\n".join(lines) + "\n"


@dataclass
class LoopLaw:
    """Inverse-CDF table of the loop length Y at a label-j vertex, P[Y = 2n] = C^(j)_n eta^n / G^j."""

    j: int
    cdf: np.ndarray
    truncated: bool  # True when the table was cut at the cap rather than the tail cutoff

    def sample_half(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Half-lengths n for uniforms u, and a flag for draws beyond the table."""
        n = np.searchsorted(self.cdf, u, side="right")
        over = n >= len(self.cdf)
        return np.minimum(n, len(self.cdf) - 1), over


def loop_law(eta, j: int, s: int = 2, cap: int = LOOP_CAP) -> LoopLaw:
    eta = float(eta)
    if eta == 0:
        return LoopLaw(j, np.array([1.0]), False)
    G = g_eval(s, eta).value
    n = np.arange(cap + 1, dtype=float)
    m = (s + 1) * n + j
    # log of j/((s+1)n+j) * binom((s+1)n+j, n)
    log_c = math.log(j) - np.log(m) + gammaln(m + 1) - gammaln(n + 1) - gammaln(s * n + j + 1)
    pmf = np.exp(log_c + n * math.log(eta) - j * math.log(G))
    cdf = np.cumsum(pmf)
    tail = 1.0 - cdf
    cut = np.flatnonzero(tail < TAIL_CUTOFF)
    if len(cut):
        size = int(cut[0]) + 1
        cdf = cdf[:size]
        cdf[-1] = 1.0
        return LoopLaw(j, cdf, False)
    return LoopLaw(j, cdf, True)


def _ks(k_max: int, ks) -> list[int]:
    if ks is None:
        return [k_max]
    ks = sorted(set(int(k) for k in ks))
    if ks[-1] > k_max or ks[0] < 0:
        raise ValueError("requested k outside 0..k_max")
    return ks


def exit_times_increments(end: EndSpec, eta, k_max: int, count: int, seed: int, ks=None) -> ExitTimes:
    """Sample N_k from independent loop lengths.

    N_k = k + Y_0 + ... + Y_k, where Y_i is the length of the last loop at
    t_i that stays in the subtree of t_i, with the law of a loop at a vertex
    of label l(t_i).  Draws beyond the loop table (only possible at the
    critical eta) are set to the table's cap and flagged censored.
    """
    s = end.s
    if float(eta) > float(critical_point(s)) or float(eta) < 0:
        raise ValueError(f"eta={eta} outside [0, {critical_point(s)}]")
    ks = _ks(k_max, ks)
    labels = np.array([end.letter(i) for i in range(k_max + 1)])
    laws = {j: loop_law(eta, j, s) for j in set(labels.tolist())}
    half = np.zeros((count, k_max + 1), dtype=np.int64)
    over = np.zeros((count, k_max + 1), dtype=bool)
    u = np.hstack(list(_uniform_blocks(seed, count, k_max + 1)))
    for j, law in laws.items():
        cols = labels == j
        h, o = law.sample_half(u[:, cols])
        half[:, cols] = h
        over[:, cols] = o
    cum = np.cumsum(2 * half, axis=1)
    cens = np.cumsum(over, axis=1) > 0
    cols = np.array(ks)
    N = cum[:, cols] + cols
    r = np.array([end.label_sum(k) for k in ks])
    return ExitTimes(ks, N, r, cens[:, cols], "increments")


def exit_times_direct(chain: ChainModel, k_max: int, horizon: int, count: int, seed: int, margin: int = 30, ks=None) -> ExitTimes:
    """Simulate the walk and record the last visit to each t_k.

    The last visit to t_k is declared once the walk sits in the subtree of
    t_k at least 2*margin levels below it.  A record is censored when that
    never happens within the horizon, or when the walk comes back to t_k
    after the declaration.
    """
    walk = _require_walk(chain)
    if walk.end is None or walk.derooted:
        raise ValueError("exit times need the rooted walk toward an end")
    ks = _ks(k_max, ks)
    sim = TreeWalkSimulator(walk, count, horizon, seed)
    last = np.zeros((count, k_max + 1), dtype=np.int64)
    last[:, 0] = 0
    seen = np.zeros((count, k_max + 1), dtype=bool)
    seen[:, 0] = True
    violated = np.zeros((count, k_max + 1), dtype=bool)
    declared = np.full(count, -1, dtype=np.int64)
    rows = np.arange(count)

    def record(s: TreeWalkSimulator):
        cp, depth = s.own.cp, s.depth
        at = (cp == depth) & (depth <= k_max)
        i, k = rows[at], depth[at]
        last[i, k] = s.time
        seen[i, k] = True
        violated[i, k] |= k <= declared[i]
        np.maximum(declared, np.minimum(np.minimum(cp, depth - 2 * margin), k_max), out=declared)

    sim.run(record)
    kk = np.arange(k_max + 1)
    censored = (~seen) | violated | (kk[None, :] > declared[:, None])
    cols = np.array(ks)
    r = np.array([walk.end.label_sum(k) for k in ks])
    return ExitTimes(ks, last[:, cols], r, censored[:, cols], "direct")


@dataclass
class LLNSummary:
    eta: float
    ks: list[int]
    means: list[float]
    stderrs: list[float]
    censored_fraction: list[float]
    target: float
    loop_mean_per_label: float
    quantiles: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return self.means[-1]

    @property
    def relative_error(self) -> float:
        if self.target in (0.0, math.inf):
            return math.nan if self.mean else 0.0
        return abs(self.mean - self.target) / self.target


def lln_experiment(end: EndSpec, eta, k_max: int, count: int, seed: int, ks=None) -> LLNSummary:
    """Distribution of (N_k - k)/r(t_k) from increment sampling, against f(eta).

    ``target`` is f(eta) = 4 eta G'/G (infinite at the critical point).
    ``loop_mean_per_label`` is 2 eta G'/G, the mean loop length per unit of
    label: by linearity it is the exact expectation of the ratio.
    """
    ks = _ks(k_max, ks if ks is not None else [k_max])
    s = end.s
    ex = exit_times_increments(end, eta, k_max, count, seed, ks=ks)
    critical = float(eta) >= float(critical_point(s))
    target = math.inf if critical else lln_limit(float(eta), s, experimental=s != 2)
    per_label = loop_mean(float(eta), 1, s)
    means, errs, cens = [], [], []
    for k in ks:
        x = ex.ratios(k)
        means.append(float(np.mean(x)))
        errs.append(float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else math.nan)
        cens.append(float(np.mean(ex.censored[:, ex.column(k)])))
    last = ex.ratios(ks[-1])
    quantiles = {q: float(np.quantile(last, q)) for q in (0.05, 0.25, 0.5, 0.75, 0.95)}
    return LLNSummary(float(eta), ks, means, errs, cens, target, per_label, quantiles)


# ---------------------------------------------------------------------------
# Convergence and recurrence


@dataclass
class ConvergenceSummary:
    steps: int
    threshold: int
    fraction: float
    prefix_lengths: np.ndarray


def convergence_to_end(chain: ChainModel, end: EndSpec | None = None, steps: int = 2000, count: int = 1000, seed: int = 0, threshold: int | None = None) -> ConvergenceSummary:
    """Fraction of walks whose final position shares more than ``threshold`` letters with the end."""
    walk = _require_walk(chain)
    end = end if end is not None else walk.end
    if end is None:
        raise ValueError("an end to measure against is required")
    if threshold is None:
        threshold = max(1, steps // 100)
    sim = TreeWalkSimulator(walk, count, steps, seed, track=end)
    sim.run()
    prefix = sim.track.cp.copy()
    return ConvergenceSummary(steps, threshold, float(np.mean(prefix > threshold)), prefix)


@dataclass
class RecurrenceSummary:
    horizons: list[int]
    mean_returns: list[float]
    returns: np.ndarray  # shape (count, len(horizons))

    def fraction_growing(self, a: int = 0, b: int = -1) -> float:
        """Fraction of walks with more returns by horizon b than by horizon a."""
        return float(np.mean(self.returns[:, b] > self.returns[:, a]))


def recurrence_probe(chain_or_eta, horizons: Sequence[int] = (1000, 10000), count: int = 1000, seed: int = 0) -> RecurrenceSummary:
    """Root returns counted up to each horizon; a number means the auxiliary walk."""
    chain = chain_or_eta if isinstance(chain_or_eta, ChainModel) else aux_walk(chain_or_eta)
    walk = _require_walk(chain)
    horizons = sorted(int(h) for h in horizons)
    sim = TreeWalkSimulator(walk, count, horizons[-1], seed)
    out = np.zeros((count, len(horizons)), dtype=np.int64)
    marks = {h: i for i, h in enumerate(horizons)}

    def record(s: TreeWalkSimulator):
        if s.time in marks:
            out[:, marks[s.time]] = s.returns

    sim.run(record)
    return RecurrenceSummary(horizons, [float(x) for x in out.mean(axis=0)], out)


# ---------------------------------------------------------------------------
# SU(2) Haar moments


@dataclass
class SU2Moment:
    value: float
    error: float
    exact: float


def _su2_quadrature(l1: float, l2: float, n: int, order: int) -> complex:
    l3 = 1 - l1 - l2
    x, w = np.polynomial.legendre.leggauss(order)
    theta = (x + 1) * (math.pi / 2)
    w_theta = w * (math.pi / 2) * np.sin(theta)
    phi = (x + 1) * math.pi  # Gauss-Legendre on [0, 2pi]
    w_phi = w * math.pi
    psi = -2 * math.pi + 4 * math.pi * np.arange(order) / order  # periodic trapezoid on [-2pi, 2pi)
    w_psi = np.full(order, 4 * math.pi / order)
    T, P, S = np.meshgrid(theta, phi, psi, indexing="ij")
    alpha = np.cos(T / 2) * np.exp(0.5j * (P + S))
    f = (l1 * alpha + l2 * np.conj(alpha) + l3) ** n
    total = np.einsum("i,j,k,ijk->", w_theta, w_phi, w_psi, f)
    return total / (16 * math.pi**2)


def su2_moment(l1, l2, n: int, order: int = 32, tolerance: float = 1e-6) -> SU2Moment:
    """Haar integral over SU(2) of (l1 a + l2 conj(a) + 1 - l1 - l2)^n, a the (1,1) entry.

    Euler angles: a = cos(theta/2) exp(i(phi + psi)/2) with density
    sin(theta)/(16 pi^2) on [0, pi] x [0, 2pi] x [-2pi, 2pi].  Gauss-Legendre
    nodes in theta and phi, a periodic trapezoid rule in psi.  The error
    estimate compares against a finer rule and includes any imaginary part.
    """
    if order < 32:
        raise ValueError("quadrature order must be at least 32")
    l1, l2 = float(l1), float(l2)
    q = _su2_quadrature(l1, l2, n, order)
    fine = _su2_quadrature(l1, l2, n, order + order // 2)
    error = abs(q.real - fine.real) + abs(q.imag)
    if error > tolerance:
        raise ArithmeticError(f"quadrature error {error} exceeds {tolerance}")
    return SU2Moment(float(q.real), float(error), float(motzkin_root_marginal(n, l1, l2)))
