"""Cut sizes, Ising energies, exact and annealed extremal cuts, spectral bounds.

For a multigraph with loop-free weight W and Q(sigma) = sum_{i<j} W_ij sigma_i sigma_j,

    cut(sigma) = (W - Q) / 2,    H(sigma) = -Q - (number of loops),

so minimizing Q maximizes the cut and vice versa.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import LinearOperator, eigsh

from . import _kernels
from .graphs import MultiGraph, cut_size, laplacian
from .rng import make_rng
from .spins import SpinConfig, as_spins

log = logging.getLogger(__name__)

EXACT_MAX_N = 30
OBJECTIVES = ("min", "max")
CONSTRAINTS = ("bisection", "free")


def ising_energy(g: MultiGraph, s) -> int:
    """H_G(sigma) = -sum over edges of sigma_u sigma_v, with multiplicity (a loop gives -1)."""
    sigma = as_spins(s).sigma.astype(np.int64)
    if len(sigma) != g.n:
        raise ValueError(f"configuration has length {len(sigma)}, graph has {g.n} vertices")
    return -int(np.sum(g.mult * sigma[g.u] * sigma[g.v]))


@dataclass(frozen=True, eq=False)
class CutResult:
    value: int
    config: SpinConfig
    objective: str
    constraint: str
    solver: str
    certificate: tuple[float, float] | None = None
    stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "config": self.config.to_list(),
            "objective": self.objective,
            "constraint": self.constraint,
            "solver": self.solver,
            "certificate": list(self.certificate) if self.certificate else None,
            "stats": self.stats,
        }


def _check(constraint: str, objective: str, n: int) -> None:
    if constraint not in CONSTRAINTS:
        raise ValueError(f"constraint must be one of {CONSTRAINTS}")
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    if constraint == "bisection" and n % 2:
        raise ValueError("bisection needs an even number of vertices")


# -- exact enumeration ------------------------------------------------------

def exact_all(g: MultiGraph) -> dict[tuple[str, str], CutResult]:
    """All four extremal cuts from one Gray-code pass; keys are (constraint, objective).

    sigma_0 is pinned to +1 (cuts are invariant under global flip), so the
    pass visits 2^(n-1) configurations with an O(degree) update each.
    """
    if g.n > EXACT_MAX_N:
        raise ValueError(f"exact enumeration limited to n <= {EXACT_MAX_N}; use local_search")
    if g.n < 2:
        raise ValueError("need at least two vertices")
    indptr, indices, w = g.csr
    t0 = time.perf_counter()
    qmin, cmin, qmax, cmax, bmin, cbmin, bmax, cbmax = _kernels.gray_extremes(indptr, indices, w, g.n)
    stats = {"configurations": 1 << (g.n - 1), "elapsed_s": time.perf_counter() - t0}
    found = {("free", "max"): cmin, ("free", "min"): cmax}
    if g.n % 2 == 0:
        found[("bisection", "max")] = cbmin
        found[("bisection", "min")] = cbmax
    out = {}
    for (constraint, objective), code in found.items():
        config = SpinConfig.from_bits(int(code), g.n)
        out[(constraint, objective)] = CutResult(cut_size(g, config), config, objective, constraint,
                                                 "exact", stats=stats)
    return out


def exact_extremal(g: MultiGraph, constraint: str = "bisection", objective: str = "min") -> CutResult:
    """Global optimum by exhaustive Gray-code enumeration (n <= 30)."""
    _check(constraint, objective, g.n)
    return exact_all(g)[(constraint, objective)]


# -- simulated annealing -----------------------------------------------------

@dataclass
class AnnealSettings:
    """Geometric schedule from t_start to t_end (in units of the mean degree)."""

    restarts: int = 8
    n_temps: int = 40
    moves_per_spin: int = 100
    t_start: float = 2.0
    t_end: float = 0.01

    def temperatures(self, scale: float) -> np.ndarray:
        return scale * np.geomspace(self.t_start, self.t_end, self.n_temps)


def _seed32(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**31 - 1))


def anneal_quadratic(indptr, indices, weights, n: int, sign: float, balanced: bool,
                     temps: np.ndarray, moves: int, restarts: int, rng: np.random.Generator,
                     init: np.ndarray | None = None):
    """Best of ``restarts`` annealing runs minimizing sign * Q; returns (sigma, Q, stats)."""
    best_sigma, best_q = None, math.inf
    proposed = accepted = 0
    for r in range(restarts):
        if init is not None and r == 0:
            start = np.asarray(init, dtype=np.int8)
        elif balanced:
            start = SpinConfig.random_balanced(n, rng).sigma
        else:
            start = SpinConfig.random(n, rng).sigma
        sigma, q, p, a = _kernels.anneal(indptr, indices, weights, start.astype(np.int8), float(sign),
                                         balanced, temps, moves, _seed32(rng))
        proposed += p
        accepted += a
        if best_sigma is None or sign * q < sign * best_q:
            best_sigma, best_q = sigma, q
    stats = {"restarts": restarts, "proposed": int(proposed), "accepted": int(accepted),
             "acceptance": accepted / proposed if proposed else 0.0}
    return np.where(best_sigma > 0, 1, -1).astype(np.int8), best_q, stats


def local_search(g: MultiGraph, constraint: str = "bisection", objective: str = "min",
                 opts: AnnealSettings | None = None, seed=0) -> CutResult:
    """Simulated annealing; swap moves for bisections, single flips otherwise.

    The value is the cut of an actual configuration, hence a lower bound
    for max objectives and an upper bound for min objectives.
    """
    _check(constraint, objective, g.n)
    opts = opts or AnnealSettings()
    rng = make_rng(seed, "local_search")
    indptr, indices, w = g.csr
    scale = max(float(w.sum()) / g.n, 1e-3)  # mean degree without loops
    sign = 1.0 if objective == "max" else -1.0  # max cut <=> min Q
    t0 = time.perf_counter()
    sigma, _, stats = anneal_quadratic(indptr, indices, w, g.n, sign, constraint == "bisection",
                                       opts.temperatures(scale), opts.moves_per_spin * g.n,
                                       opts.restarts, rng)
    stats["elapsed_s"] = time.perf_counter() - t0
    config = SpinConfig(sigma)
    return CutResult(cut_size(g, config), config, objective, constraint, "local", stats=stats)


# -- spectral bounds ---------------------------------------------------------

class SpectralBounds(NamedTuple):
    mcut_lower: float  # (n/4) lambda_2
    MCUT_upper: float  # (n/4) lambda_max
    lambda_2: float
    lambda_max: float
    half_lambda_2: float  # the alternative normalization (1/2) lambda_2, reported only


DENSE_SPECTRUM_N = 1500


def spectral_bounds(g: MultiGraph) -> SpectralBounds:
    """(n/4) lambda_2(L) <= mcut and MCUT <= (n/4) lambda_max(L).

    lambda_2 is the minimum of the Rayleigh quotient on the complement of
    the all-ones vector, so it is 0 for disconnected graphs.
    """
    n = g.n
    if n < 2:
        raise ValueError("need at least two vertices")
    if n <= DENSE_SPECTRUM_N:
        ev = np.linalg.eigvalsh(laplacian(g))
        lam2, lam_max = float(ev[1]), float(ev[-1])
    else:
        off = g.u != g.v
        a = csr_matrix((np.concatenate([g.mult[off], g.mult[off]]).astype(float),
                        (np.concatenate([g.u[off], g.v[off]]), np.concatenate([g.v[off], g.u[off]]))),
                       shape=(n, n))
        deg = np.asarray(a.sum(axis=1)).ravel()
        lap = LinearOperator((n, n), matvec=lambda x: deg * x - a @ x, dtype=float)
        lam_max = float(eigsh(lap, k=1, which="LA", return_eigenvectors=False)[0])
        # lift the constant eigenvector above the spectrum, leaving lambda_2 the smallest
        lift = 2.0 * lam_max + 1.0
        deflated = LinearOperator((n, n), matvec=lambda x: deg * x - a @ x + lift * x.mean(), dtype=float)
        lam2 = float(eigsh(deflated, k=1, which="SA", return_eigenvectors=False)[0])
        lam2 = max(lam2, 0.0)
    return SpectralBounds(n * lam2 / 4, n * lam_max / 4, lam2, lam_max, lam2 / 2)


# -- balance map -------------------------------------------------------------

def balance_map(s) -> SpinConfig:
    """Flip the m(sigma) lowest-indexed + spins, landing in the balanced set."""
    s = as_spins(s)
    if s.n % 2:
        raise ValueError("balance map needs even n")
    m = s.m
    if m < 0:
        raise ValueError("negative magnetization; apply sigma -> -sigma first")
    sigma = s.sigma.copy()
    sigma[np.flatnonzero(sigma == 1)[:m]] = -1
    return SpinConfig(sigma)
