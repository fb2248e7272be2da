"""Sherrington-Kirkpatrick disorder, ground states and exact small-n Gibbs measures.

H^SK(sigma) = -(2n)^{-1/2} sum_{i,j} J_ij sigma_i sigma_j over all ordered
pairs including i = j.  With J~ = (J + J^T)/sqrt(2) (zero diagonal),

    H^SK(sigma) = -n^{-1/2} sum_{i<j} J~_ij sigma_i sigma_j - (2n)^{-1/2} tr J.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import combinations

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .cuts import anneal_quadratic
from .graphs import MultiGraph
from .rng import make_rng
from .spins import SpinConfig, as_spins

EXACT_GROUND_MAX_N = 24
ENUMERATION_MAX_N = 22
REBALANCE_THRESHOLD = 6.0


@dataclass(frozen=True, eq=False)
class Couplings:
    """Gaussian disorder J (n x n, all entries independent standard normal)."""

    J: np.ndarray

    def __post_init__(self):
        j = np.asarray(self.J, dtype=float)
        if j.ndim != 2 or j.shape[0] != j.shape[1]:
            raise ValueError("J must be square")
        object.__setattr__(self, "J", j)

    @classmethod
    def sample(cls, n: int, seed) -> "Couplings":
        return cls(make_rng(seed, "couplings").standard_normal((n, n)))

    @property
    def n(self) -> int:
        return self.J.shape[0]

    @cached_property
    def symmetric(self) -> np.ndarray:
        """J~ = (J + J^T) / sqrt(2) with zero diagonal."""
        s = (self.J + self.J.T) / math.sqrt(2.0)
        np.fill_diagonal(s, 0.0)
        return s

    @property
    def offset(self) -> float:
        """Configuration-independent part -(2n)^{-1/2} tr J."""
        return -float(np.trace(self.J)) / math.sqrt(2.0 * self.n)

    @cached_property
    def csr(self):
        n = self.n
        mask = ~np.eye(n, dtype=bool)
        cols = np.tile(np.arange(n), (n, 1))[mask]
        indptr = np.arange(0, n * (n - 1) + 1, n - 1, dtype=np.int64)
        return indptr, cols.astype(np.int64), self.symmetric[mask].astype(np.float64)


def sk_energy(c: Couplings, s) -> float:
    sigma = as_spins(s).sigma.astype(float)
    if len(sigma) != c.n:
        raise ValueError(f"configuration has length {len(sigma)}, couplings have n = {c.n}")
    return -float(sigma @ c.J @ sigma) / math.sqrt(2.0 * c.n)


def _energy_from_q(c: Couplings, q: float) -> float:
    return -q / math.sqrt(c.n) + c.offset


def sk_ground(c: Couplings, constraint: str = "free", method: str = "exact", seed=None,
              restarts: int = 8) -> tuple[float, SpinConfig]:
    """Minimum of H^SK over the cube (``free``) or over zero magnetization (``bisection``)."""
    if constraint not in ("free", "bisection"):
        raise ValueError("constraint must be 'free' or 'bisection'")
    n = c.n
    if constraint == "bisection" and n % 2:
        raise ValueError("bisection needs even n")
    indptr, indices, w = c.csr
    if method == "exact":
        if n > EXACT_GROUND_MAX_N:
            raise ValueError(f"exact ground states limited to n <= {EXACT_GROUND_MAX_N}")
        _, _, _, cmax, _, _, _, cbmax = _kernels.gray_extremes(indptr, indices, w, n)
        config = SpinConfig.from_bits(int(cmax if constraint == "free" else cbmax), n)
    elif method == "local":
        rng = make_rng(0 if seed is None else seed, "sk_ground")
        temps = math.sqrt(n) * np.geomspace(2.0, 0.01, 40)
        sigma, _, _ = anneal_quadratic(indptr, indices, w, n, -1.0, constraint == "bisection",
                                       temps, 100 * n, restarts, rng)
        config = SpinConfig(sigma)
    else:
        raise ValueError("method must be 'exact' or 'local'")
    return sk_energy(c, config), config


def local_fields(c: Couplings, s) -> np.ndarray:
    """f_i = (2 sqrt(n))^{-1} sum_j J~_ij sigma_j."""
    sigma = as_spins(s).sigma.astype(float)
    return c.symmetric @ sigma / (2.0 * math.sqrt(c.n))


def rebalance(c: Couplings, star) -> tuple[SpinConfig, bool]:
    """Flip |m| majority spins with the smallest local fields to reach zero magnetization.

    Returns the balanced configuration and whether every flipped spin had
    |f_i| <= 6; smallest-|f| order is also the fallback when fewer than |m|
    majority spins meet that threshold.
    """
    star = as_spins(star)
    if star.n % 2:
        raise ValueError("rebalancing needs even n")
    m = star.m
    if m == 0:
        return star, True
    majority = 1 if m > 0 else -1
    f = np.abs(local_fields(c, star))
    cand = np.flatnonzero(star.sigma == majority)
    chosen = cand[np.argsort(f[cand], kind="stable")[: abs(m)]]
    sigma = star.sigma.copy()
    sigma[chosen] = -majority
    return SpinConfig(sigma), bool(np.all(f[chosen] <= REBALANCE_THRESHOLD))


# -- models and exact enumeration ----------------------------------------------

@dataclass(frozen=True)
class SkModel:
    couplings: Couplings

    label = "SK"

    @property
    def n(self) -> int:
        return self.couplings.n

    def energies(self, spins: np.ndarray) -> np.ndarray:
        c = self.couplings
        return -np.einsum("ci,ci->c", spins @ c.J, spins) / math.sqrt(2.0 * c.n)


@dataclass(frozen=True)
class DiluteModel:
    """H = scale * H_G with H_G the Ising energy (loops contribute -multiplicity)."""

    graph: MultiGraph
    scale: float = 1.0

    label = "dilute"

    @property
    def n(self) -> int:
        return self.graph.n

    def energies(self, spins: np.ndarray) -> np.ndarray:
        g = self.graph
        return -self.scale * ((spins[:, g.u] * spins[:, g.v]) @ g.mult.astype(float))


@dataclass(frozen=True)
class InterpolatedModel:
    """H = (2 gamma)^{-1/2} H^D_G + sqrt(t) H^SK, G drawn at rate gamma (1 - t)."""

    couplings: Couplings
    graph: MultiGraph
    t: float
    gamma: float

    label = "interpolated"

    @property
    def n(self) -> int:
        return self.couplings.n

    def energies(self, spins: np.ndarray) -> np.ndarray:
        dilute = DiluteModel(self.graph, 1.0 / math.sqrt(2.0 * self.gamma)).energies(spins)
        if self.t == 0:
            return dilute
        return dilute + math.sqrt(self.t) * SkModel(self.couplings).energies(spins)


@lru_cache(maxsize=16)
def configurations(n: int, constrained: bool) -> np.ndarray:
    """All configurations (rows, float +-1), restricted to zero magnetization if constrained."""
    if n > ENUMERATION_MAX_N:
        raise ValueError(f"enumeration limited to n <= {ENUMERATION_MAX_N}")
    if constrained:
        if n % 2:
            raise ValueError("zero magnetization needs even n")
        rows = np.ones((math.comb(n, n // 2), n), dtype=np.int8)
        for r, minus in enumerate(combinations(range(n), n // 2)):
            rows[r, list(minus)] = -1
    else:
        codes = np.arange(1 << n, dtype=np.int64)
        rows = (1 - 2 * ((codes[:, None] >> np.arange(n)) & 1)).astype(np.int8)
    rows.setflags(write=False)
    return rows


@dataclass
class GibbsSummary:
    beta: float
    log_partition: float
    free_energy_density: float
    overlap_moments: list[float]  # E<Q_l^2> for l = 1..len
    model: str
    correlations: np.ndarray | None = field(default=None, repr=False)


def _chunks(n: int, constrained: bool, size: int = 1 << 16):
    if n <= 16 or constrained:
        yield configurations(n, constrained).astype(float)
        return
    for start in range(0, 1 << n, size):
        codes = np.arange(start, min(start + size, 1 << n), dtype=np.int64)
        yield (1 - 2 * ((codes[:, None] >> np.arange(n)) & 1)).astype(float)


def free_energy(model, beta: float, constrained: bool = True, l_max: int = 8) -> GibbsSummary:
    """Exact log Z = log sum exp(-beta H) by enumeration, with overlap moments.

    E<Q_l^2> = n^{-2} sum_{i,j} <sigma_i sigma_j>^l for l = 1..l_max, from
    the single-replica pair correlations.  Negative beta is allowed.
    """
    n = model.n
    if n > ENUMERATION_MAX_N:
        raise ValueError(f"enumeration limited to n <= {ENUMERATION_MAX_N}")
    chunks = list(_chunks(n, constrained))
    logw = [-beta * model.energies(s) for s in chunks]
    log_z = float(logsumexp(np.concatenate(logw)))
    corr = np.zeros((n, n))
    for s, lw in zip(chunks, logw):
        p = np.exp(lw - log_z)
        corr += (s * p[:, None]).T @ s
    np.fill_diagonal(corr, 1.0)
    moments = [float(np.mean(corr**ell)) for ell in range(1, l_max + 1)]
    if constrained:
        moments[0] = 0.0  # Q_1 vanishes identically on zero magnetization
    return GibbsSummary(float(beta), log_z, log_z / n, moments, model.label, corr)


@dataclass(frozen=True)
class InterpDerivative:
    d_sk: float
    d_dilute: float
    tail_bound: float
    moments: tuple[float, ...]

    @property
    def total(self) -> float:
        return self.d_sk + self.d_dilute


def interp_derivative(c: Couplings, g: MultiGraph, beta: float, gamma: float, t: float,
                      l_max: int = 16, tol: float = 1e-6) -> InterpDerivative:
    """Closed-form SK and dilute parts of d phi_n / dt for one disorder sample.

    ``g`` is the graph at rate gamma (1 - t).  The dilute series is cut at
    ``l_max`` with tail bound gamma |tanh b|^(l_max+1) / (1 - |tanh b|),
    b = beta / sqrt(2 gamma); a bound above ``tol`` raises.
    """
    n = c.n
    if n > 16:
        raise ValueError("interp_derivative limited to n <= 16")
    if not 0 < t < 1:
        raise ValueError("need 0 < t < 1")
    if l_max < 8:
        raise ValueError("need l_max >= 8")
    summary = free_energy(InterpolatedModel(c, g, t, gamma), beta, constrained=True, l_max=l_max)
    m = summary.overlap_moments
    b = beta / math.sqrt(2.0 * gamma)
    th = math.tanh(b)
    tail = gamma * abs(th) ** (l_max + 1) / (1.0 - abs(th))
    if tail > tol:
        raise ValueError(f"dilute series tail bound {tail:.3g} exceeds {tol:g}; raise l_max")
    d_sk = beta**2 / 4.0 * (1.0 - m[1])
    series = math.fsum((-1) ** ell / ell * th**ell * m[ell - 1] for ell in range(1, l_max + 1))
    d_dilute = -gamma * math.log(math.cosh(b)) + gamma * series
    return InterpDerivative(d_sk, d_dilute, tail, tuple(m))
