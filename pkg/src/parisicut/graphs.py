"""Random multigraph ensembles, the RED/BLUE surgery and its exact expectations.

Vertices are 0-based internally; the text format is 1-based.  Self-loops
and multi-edges are allowed everywhere except in the stochastic block
model, which is simple by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .rng import make_rng
from .spins import SpinConfig, as_spins


# -- representation ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MultiGraph:
    """Vertex count plus distinct pairs ``u[e] <= v[e]`` with multiplicities ``mult[e]``."""

    n: int
    u: np.ndarray
    v: np.ndarray
    mult: np.ndarray

    @classmethod
    def from_pairs(cls, n: int, a, b, mult=None) -> "MultiGraph":
        """Collapse a list of (possibly repeated, unordered) endpoint pairs."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if n < 1:
            raise ValueError("need at least one vertex")
        if a.shape != b.shape or (a.size and (min(a.min(), b.min()) < 0 or max(a.max(), b.max()) >= n)):
            raise ValueError("edge endpoints out of range")
        w = np.ones(a.size, dtype=np.int64) if mult is None else np.asarray(mult, dtype=np.int64)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        keys, inv = np.unique(lo * n + hi, return_inverse=True)
        counts = np.bincount(inv, weights=w, minlength=len(keys)).astype(np.int64)
        keep = counts > 0
        keys, counts = keys[keep], counts[keep]
        return cls(int(n), keys // n, keys % n, counts)

    @classmethod
    def empty(cls, n: int) -> "MultiGraph":
        return cls.from_pairs(n, [], [])

    @property
    def m_total(self) -> int:
        """Number of edges counted with multiplicity."""
        return int(self.mult.sum())

    @property
    def n_loops(self) -> int:
        return int(self.mult[self.u == self.v].sum())

    def degrees(self) -> np.ndarray:
        """Degrees with multiplicity; a self-loop counts twice."""
        return (np.bincount(self.u, self.mult, self.n) + np.bincount(self.v, self.mult, self.n)).astype(np.int64)

    def edge_list(self) -> np.ndarray:
        """One row (u, v) per edge, repeated by multiplicity."""
        return np.repeat(np.stack([self.u, self.v], axis=1), self.mult, axis=0)

    def union(self, other: "MultiGraph") -> "MultiGraph":
        if other.n != self.n:
            raise ValueError("vertex counts differ")
        return MultiGraph.from_pairs(self.n, np.concatenate([self.u, other.u]),
                                     np.concatenate([self.v, other.v]),
                                     np.concatenate([self.mult, other.mult]))

    def thin(self, keep: float, rng: np.random.Generator) -> "MultiGraph":
        """Keep every edge copy independently with probability ``keep``."""
        return MultiGraph.from_pairs(self.n, self.u, self.v, rng.binomial(self.mult, keep))

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric adjacency without loops: (indptr, indices, weights)."""
        off = self.u != self.v
        rows = np.concatenate([self.u[off], self.v[off]])
        cols = np.concatenate([self.v[off], self.u[off]])
        w = np.concatenate([self.mult[off], self.mult[off]]).astype(np.float64)
        order = np.lexsort((cols, rows))
        indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=self.n))]).astype(np.int64)
        return indptr, cols[order].astype(np.int64), w[order]

    def __eq__(self, other) -> bool:
        return (isinstance(other, MultiGraph) and self.n == other.n
                and np.array_equal(self.u, other.u) and np.array_equal(self.v, other.v)
                and np.array_equal(self.mult, other.mult))

    # text format: "n m_total" then "u v mult" per distinct edge, 1-indexed

    def to_text(self) -> str:
        lines = [f"{self.n} {self.m_total}"]
        lines += [f"{a + 1} {b + 1} {c}" for a, b, c in zip(self.u.tolist(), self.v.tolist(), self.mult.tolist())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MultiGraph":
        rows = [line.split() for line in text.splitlines() if line.strip() and not line.startswith("#")]
        if not rows or len(rows[0]) != 2:
            raise ValueError("missing 'n m_total' header")
        n, m_total = int(rows[0][0]), int(rows[0][1])
        body = np.array([[int(t) for t in r] for r in rows[1:]], dtype=np.int64).reshape(-1, 3)
        if np.any(body[:, 2] < 1):
            raise ValueError("multiplicities must be >= 1")
        g = cls.from_pairs(n, body[:, 0] - 1, body[:, 1] - 1, body[:, 2])
        if g.m_total != m_total:
            raise ValueError(f"header says {m_total} edges, body has {g.m_total}")
        return g

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> "MultiGraph":
        return cls.from_text(Path(path).read_text())


def cut_size(g: MultiGraph, s) -> int:
    """Edges (with multiplicity) whose endpoints carry different spins."""
    sigma = as_spins(s).sigma
    if len(sigma) != g.n:
        raise ValueError(f"configuration has length {len(sigma)}, graph has {g.n} vertices")
    return int(g.mult[sigma[g.u] != sigma[g.v]].sum())


def laplacian(g: MultiGraph) -> np.ndarray:
    """Dense L = D - A with multiplicities; self-loops do not enter."""
    off = g.u != g.v
    a = np.zeros((g.n, g.n))
    np.add.at(a, (g.u[off], g.v[off]), g.mult[off])
    a += a.T
    return np.diag(a.sum(axis=1)) - a


# -- ensembles ----------------------------------------------------------------

def gen_er_gnm(n: int, m: int, seed) -> MultiGraph:
    """m edges with independent uniform endpoints (loops and repeats allowed)."""
    if n < 2 or m < 0:
        raise ValueError("need n >= 2 and m >= 0")
    rng = make_rng(seed, "gen_er_gnm")
    ends = rng.integers(0, n, size=(m, 2))
    return MultiGraph.from_pairs(n, ends[:, 0], ends[:, 1])


def gen_poissonized(n: int, gamma: float, seed) -> MultiGraph:
    """Poissonized multigraph: z_ij ~ Poisson(2 gamma / n) for i != j, z_ii ~ Poisson(gamma / n).

    Sampled as Poisson(gamma n) edges with independent uniform endpoints,
    which has the same law.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    rng = make_rng(seed, "gen_poissonized")
    ends = rng.integers(0, n, size=(rng.poisson(gamma * n), 2))
    return MultiGraph.from_pairs(n, ends[:, 0], ends[:, 1])


def uniform_matching(items: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Uniform perfect matching of ``items`` (an odd one out is the last after shuffling).

    Returns ``(pairs, leftover)`` with pairs of shape (len // 2, 2) and
    leftover an array of 0 or 1 items.
    """
    perm = rng.permutation(np.asarray(items))
    cut = len(perm) - len(perm) % 2
    return perm[:cut].reshape(-1, 2), perm[cut:]


def gen_config(degrees: Sequence[int], seed) -> MultiGraph:
    """Configuration model: uniform matching of the half-edges."""
    deg = np.asarray(degrees, dtype=np.int64)
    if np.any(deg < 0):
        raise ValueError("degrees must be nonnegative")
    if deg.sum() % 2:
        raise ValueError("total degree must be even")
    rng = make_rng(seed, "gen_config")
    pairs, _ = uniform_matching(np.repeat(np.arange(len(deg)), deg), rng)
    return MultiGraph.from_pairs(len(deg), pairs[:, 0], pairs[:, 1])


def gen_regular(n: int, gamma: int, seed) -> MultiGraph:
    """Random gamma-regular multigraph R_n(gamma) from the configuration model."""
    if (n * gamma) % 2:
        raise ValueError("n * gamma must be even")
    return gen_config(np.full(n, gamma), seed)


def gen_poisson_cloning(n: int, gamma_minus: float, seed) -> MultiGraph:
    """Configuration model on i.i.d. Poisson((n-1) gamma_minus / n) degrees.

    An odd half-edge total is made even by discarding one half-edge chosen
    uniformly.
    """
    if not gamma_minus > 0:
        raise ValueError("gamma_minus must be positive")
    rng = make_rng(seed, "gen_poisson_cloning")
    deg = rng.poisson((n - 1) * gamma_minus / n, size=n)
    if deg.sum() % 2:
        stubs = np.repeat(np.arange(n), deg)
        deg[stubs[rng.integers(len(stubs))]] -= 1
    pairs, _ = uniform_matching(np.repeat(np.arange(n), deg), rng)
    return MultiGraph.from_pairs(n, pairs[:, 0], pairs[:, 1])


@dataclass(frozen=True, eq=False)
class SbmInstance:
    graph: MultiGraph
    planted: SpinConfig
    a: float
    b: float


def gen_er_binomial(n: int, p: float, rng: np.random.Generator) -> MultiGraph:
    """Simple G(n, p) graph."""
    i, j = np.triu_indices(n, k=1)
    keep = rng.random(len(i)) < p
    return MultiGraph.from_pairs(n, i[keep], j[keep])


def gen_sbm(n: int, a: float, b: float, seed) -> SbmInstance:
    """Two-block planted partition: within-class edges w.p. a/n, across w.p. b/n.

    The planted configuration is uniform over balanced configurations.
    ``a == b`` (the null model) and ``b == 0`` are accepted.
    """
    if n % 2 or n < 2:
        raise ValueError("n must be even and positive")
    if not (0 <= b <= a <= n):
        raise ValueError("need 0 <= b <= a <= n so that a/n, b/n are probabilities")
    rng = make_rng(seed, "gen_sbm")
    planted = SpinConfig.random_balanced(n, rng)
    s = planted.sigma
    i, j = np.triu_indices(n, k=1)
    p = np.where(s[i] == s[j], a / n, b / n)
    keep = rng.random(len(i)) < p
    return SbmInstance(MultiGraph.from_pairs(n, i[keep], j[keep]), planted, float(a), float(b))


# -- RED/BLUE surgery -----------------------------------------------------------

RED, BLUE = 0, 1


def default_gamma_minus(gamma: float) -> float:
    """gamma - sqrt(gamma) log(gamma)."""
    return gamma - math.sqrt(gamma) * math.log(gamma)


@dataclass(frozen=True, eq=False)
class ColoredGraph:
    """Configuration-model graph with colored half-edges.

    Half-edge ``h`` belongs to vertex ``owner[h]``; ``partner[h]`` is the
    half-edge it is matched to and ``colors[h]`` is RED or BLUE.  Vertex i
    owns ``gamma`` half-edges, of which ``Z[i] = (gamma - X[i])_+`` are BLUE.
    """

    base: MultiGraph
    owner: np.ndarray
    partner: np.ndarray
    colors: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    gamma: int
    gamma_minus: float

    def _edge_class(self, first: int, second: int) -> MultiGraph:
        h = np.flatnonzero(self.partner > np.arange(len(self.partner)))
        c1, c2 = self.colors[h], self.colors[self.partner[h]]
        sel = ((c1 == first) & (c2 == second)) | ((c1 == second) & (c2 == first))
        return MultiGraph.from_pairs(self.base.n, self.owner[h[sel]], self.owner[self.partner[h[sel]]])

    @cached_property
    def g_rr(self) -> MultiGraph:
        return self._edge_class(RED, RED)

    @cached_property
    def g_rb(self) -> MultiGraph:
        return self._edge_class(RED, BLUE)

    @cached_property
    def g_bb(self) -> MultiGraph:
        return self._edge_class(BLUE, BLUE)


def color_and_decompose(n: int, gamma: int, seed, gamma_minus: float | None = None) -> ColoredGraph:
    """Draw X_i ~ Poisson(gamma_minus), color Z_i half-edges of vertex i BLUE, match uniformly.

    The matching ignores colors, so which of a vertex's half-edges are BLUE
    is immaterial; the first Z_i are used.  ``gamma_minus`` defaults to
    gamma - sqrt(gamma) log(gamma).
    """
    if gamma < 1 or (n * gamma) % 2:
        raise ValueError("need integer gamma >= 1 and n * gamma even")
    gm = default_gamma_minus(gamma) if gamma_minus is None else float(gamma_minus)
    rng = make_rng(seed, "color_and_decompose")
    x = rng.poisson(gm, size=n)
    z = np.maximum(gamma - x, 0)
    owner = np.repeat(np.arange(n), gamma)
    slot = np.tile(np.arange(gamma), n)
    colors = np.where(slot < z[owner], BLUE, RED).astype(np.int8)
    pairs, _ = uniform_matching(np.arange(n * gamma), rng)
    partner = np.empty(n * gamma, dtype=np.int64)
    partner[pairs[:, 0]], partner[pairs[:, 1]] = pairs[:, 1], pairs[:, 0]
    base = MultiGraph.from_pairs(n, owner[pairs[:, 0]], owner[pairs[:, 1]])
    return ColoredGraph(base, owner, partner, colors, x, z, int(gamma), gm)


@dataclass(frozen=True, eq=False)
class SurgeryResult:
    """Parts of G1 and the rewired graph G2 = G_RR + G~_RR.

    ``leftover`` is the vertex of the single unmatched freed RED half-edge
    when their number is odd (a self-loop contributes nothing to any cut,
    so it is recorded here rather than added as an edge), else None.
    """

    g_rr: MultiGraph
    g_rb: MultiGraph
    g_bb: MultiGraph
    g_rr_tilde: MultiGraph
    g2: MultiGraph
    freed_red: np.ndarray
    leftover: int | None


def rewire(colored: ColoredGraph, seed) -> SurgeryResult:
    """Delete BB edges, cut RB edges, drop BLUE half-edges, re-match freed RED ones uniformly."""
    rng = make_rng(seed, "rewire")
    h = np.arange(len(colored.partner))
    freed = h[(colored.colors == RED) & (colored.colors[colored.partner] == BLUE)]
    freed_vertices = colored.owner[freed]
    pairs, rest = uniform_matching(freed_vertices, rng)
    tilde = MultiGraph.from_pairs(colored.base.n, pairs[:, 0], pairs[:, 1])
    return SurgeryResult(colored.g_rr, colored.g_rb, colored.g_bb, tilde, colored.g_rr.union(tilde),
                         np.sort(freed_vertices), int(rest[0]) if len(rest) else None)


def two_stage_pairing(l: int, m: int, seed) -> tuple[tuple[int, int], ...]:
    """Pair 2l RED balls (0..2l-1) via 2m extra BLUE balls.

    All 2(l+m) balls are matched uniformly; RED-RED pairs are kept, BLUE
    balls are dropped and the RED balls they held are re-matched uniformly.
    Returns the final pairing as sorted tuples, sorted.
    """
    if not 0 <= m <= l:
        raise ValueError("need 0 <= m <= l")
    rng = make_rng(seed, "two_stage_pairing")
    red = 2 * l
    pairs, _ = uniform_matching(np.arange(2 * (l + m)), rng)
    is_red = pairs < red
    kept = pairs[is_red.all(axis=1)]
    freed = pairs[is_red.sum(axis=1) == 1]
    freed = freed[freed < red]
    again, _ = uniform_matching(freed, rng)
    final = np.sort(np.concatenate([kept, again]), axis=1)
    return tuple(sorted(map(tuple, final.tolist())))


def all_pairings(items: Sequence[int]) -> list[tuple[tuple[int, int], ...]]:
    """Every perfect matching of ``items`` in canonical form."""
    items = list(items)
    if not items:
        return [()]
    first, rest = items[0], items[1:]
    out = []
    for i, other in enumerate(rest):
        for sub in all_pairings(rest[:i] + rest[i + 1:]):
            out.append(tuple(sorted(((first, other),) + sub)))
    return out


# -- exact finite-n expectations ----------------------------------------------

def _poisson_support(mu: float, tail: float = 1e-12) -> np.ndarray:
    return np.arange(int(stats.poisson.isf(tail, mu)) + 2)


def expected_blue(gamma: float, gamma_minus: float) -> float:
    """E Z_1 = E (gamma - X)_+ by exact summation over x < gamma."""
    x = np.arange(math.ceil(gamma))
    return float(np.sum((gamma - x) * stats.poisson.pmf(x, gamma_minus)))


def expected_excess(gamma: float, gamma_minus: float, tail: float = 1e-12) -> float:
    """E (X - gamma)_+ by summation truncated at ``tail`` Poisson mass."""
    x = _poisson_support(gamma_minus, tail)
    return float(np.sum(np.maximum(x - gamma, 0) * stats.poisson.pmf(x, gamma_minus)))


@dataclass(frozen=True)
class SurgeryPrediction:
    n: int
    gamma: int
    gamma_minus: float
    ez1: float  # E Z_1
    blue_fraction: float  # E Z_1 / gamma
    rb_edges: float  # E |E_RB|, loops excluded
    cut_rb: float  # E cut of G_RB at a uniform balanced sigma
    cut_bb: float  # E cut of G_BB at a uniform balanced sigma

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def surgery_expectations(n: int, gamma: int, gamma_minus: float | None = None) -> SurgeryPrediction:
    """Exact finite-n means of the surgery quantities."""
    if gamma < 2:
        raise ValueError("need gamma >= 2")
    gm = default_gamma_minus(gamma) if gamma_minus is None else float(gamma_minus)
    ez1 = expected_blue(gamma, gm)
    p = ez1 / gamma
    pairs = n * (n - 1) * gamma**2 / (n * gamma - 1)
    crossing = 1.0 / (2.0 * (1.0 - 1.0 / n))
    rb = pairs * p * (1 - p)
    return SurgeryPrediction(n, gamma, gm, ez1, p, rb, rb * crossing, 0.5 * pairs * p * p * crossing)


def conditional_cut_mean(n: int, gamma: int, s_total: int, s_plus: int) -> float:
    """E[cut of G_RB + G_BB at sigma | Z], sigma balanced with ``s_plus`` BLUE half-edges on its + side."""
    d = n * gamma - 1
    return s_total * (n * gamma / 2) / d - s_plus * (s_total - s_plus) / d


def red_cut_mean(s_total: int, s_plus: int) -> float:
    """E[cut of G~_RR | freed RED half-edges], ``s_plus`` of ``s_total`` on the + side.

    For odd totals the unmatched half-edge is uniform, giving denominator S
    in place of S - 1.
    """
    if s_total < 2:
        return 0.0
    denom = s_total - 1 if s_total % 2 == 0 else s_total
    return s_plus * (s_total - s_plus) / denom
