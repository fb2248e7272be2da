"""Parisi functional, its minimization over k-level profiles, and the beta -> oo fit."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

from .pde import PdeGrid, solve_pde
from .profile import RsbProfile
from .recursion import recursion_value

log = logging.getLogger(__name__)

#: Replica-symmetric upper bound sqrt(2/pi) on the ground-state constant.
RS_BOUND = math.sqrt(2.0 / math.pi)


def parisi_functional(profile: RsbProfile, method: str = "recursion", **kwargs) -> float:
    """P_beta[x] = f(0, 0; x) - (1/2) * integral q x(q) dq."""
    if method == "recursion":
        f00 = recursion_value(profile, **kwargs)
    elif method == "pde":
        f00 = solve_pde(profile, kwargs.get("grid"), keep_rows=False, estimate_error=False).origin
    else:
        raise ValueError(f"unknown method {method!r}")
    return f00 - profile.correction()


# -- optimization -----------------------------------------------------------

def _unpack(theta: np.ndarray, k: int, beta: float) -> RsbProfile:
    # q gaps by a softmax over k logits (first pinned at 0); m by squared,
    # cumulative increments in units of beta, clipped at beta
    logits = np.concatenate([[0.0], theta[: k - 1]])
    gaps = np.exp(logits - logits.max())
    gaps /= gaps.sum()
    gaps = np.maximum(gaps, 1e-12)
    q = np.concatenate([[0.0], np.cumsum(gaps / gaps.sum())])
    q[-1] = 1.0
    m = np.minimum(beta, beta * np.cumsum(theta[k - 1:] ** 2))
    return RsbProfile(q, m, beta)


def _pack(profile: RsbProfile) -> np.ndarray:
    logs = np.log(np.diff(profile.q))
    inc = np.diff(np.concatenate([[0.0], profile.m / profile.beta]))
    return np.concatenate([logs[1:] - logs[0], np.sqrt(np.maximum(inc, 0.0))])


def rescale(profile: RsbProfile, beta: float) -> RsbProfile:
    """Carry a profile to another temperature.

    Levels below the top keep their values; the top level, when pinned at
    beta, follows beta and its interval shrinks like 1/beta.
    """
    q = profile.q.copy()
    m = np.minimum(profile.m, beta)
    if profile.k > 1 and profile.m[-1] >= profile.beta * (1 - 1e-9):
        m[-1] = beta
        q[-2] = 1.0 - (1.0 - q[-2]) * profile.beta / beta
        q[-2] = max(q[-2], 0.5 * (q[-3] + 1.0)) if q[-2] <= q[-3] else q[-2]
    return RsbProfile(q, np.maximum.accumulate(m), beta)


def _embed(profile: RsbProfile, k: int) -> RsbProfile:
    while profile.k < k:
        profile = profile.split()
    return profile


def _random_start(k: int, beta: float, rng: np.random.Generator) -> RsbProfile:
    gaps = rng.dirichlet(np.ones(k))
    q = np.concatenate([[0.0], np.cumsum(gaps)])
    q[-1] = 1.0
    low = np.sort(rng.uniform(0.0, min(beta, 2.5), size=k - 1))
    top = beta if rng.random() < 0.75 else rng.uniform(low[-1] if k > 1 else 0.0, beta)
    m = np.concatenate([low, [top]])
    return RsbProfile(q, m, beta)


class ParisiMinimum(NamedTuple):
    profile: RsbProfile
    value: float
    converged: bool
    evaluations: int


@dataclass
class OptimizerSettings:
    restarts: int = 8
    seed: int = 0
    max_iter: int = 4000
    xatol: float = 1e-5
    fatol: float = 1e-9
    search_quad: int = 32
    quad: int = 64


def minimize_parisi(k: int, beta: float, opts: OptimizerSettings | None = None,
                    init: RsbProfile | Sequence[RsbProfile] = ()) -> ParisiMinimum:
    """Minimize P_beta over profiles with ``k`` levels.

    Restarts run Nelder-Mead on a cheaper quadrature; the best point is then
    polished at full accuracy.  ``init`` profiles (any k <= ``k``, any beta)
    are embedded and rescaled as extra starting points ahead of the random
    ones.  The reported value is always a full-accuracy
    :func:`recursion_value` evaluation of the returned profile.
    """
    if not 1 <= k <= 6:
        raise ValueError(f"k must be in [1, 6], got {k}")
    if not 0 < beta <= 32:
        raise ValueError(f"beta must be in (0, 32], got {beta}")
    opts = opts or OptimizerSettings()
    rng = np.random.default_rng(opts.seed)
    if isinstance(init, RsbProfile):
        init = [init]
    starts = [_embed(rescale(p, beta), k) for p in init]
    starts += [_random_start(k, beta, rng) for _ in range(opts.restarts)]

    evaluations = 0

    def objective(theta, quad, dy):
        nonlocal evaluations
        evaluations += 1
        prof = _unpack(theta, k, beta)
        return recursion_value(prof, quad, dy=dy) - prof.correction()

    nm = {"xatol": opts.xatol, "fatol": opts.fatol, "maxiter": opts.max_iter, "adaptive": True}
    coarse_dy = min(0.02, 0.5 / beta)
    best, converged = None, False
    for start in starts:
        res = minimize(objective, _pack(start), args=(opts.search_quad, coarse_dy),
                       method="Nelder-Mead", options=nm)
        converged |= bool(res.success)
        if best is None or res.fun < best.fun:
            best = res
    polish = minimize(objective, best.x, args=(opts.quad, None), method="Nelder-Mead", options=nm)
    converged = converged and bool(polish.success)
    profile = _unpack(polish.x, k, beta)
    value = parisi_functional(profile, quad=opts.quad)
    # keep the better of polished and unpolished at full accuracy
    raw = _unpack(best.x, k, beta)
    raw_value = parisi_functional(raw, quad=opts.quad)
    if raw_value < value:
        profile, value = raw, raw_value
    for p in starts[: len(init)]:
        v = parisi_functional(p, quad=opts.quad)
        if v < value:
            profile, value = p, v
    if not converged:
        log.warning("Nelder-Mead did not converge for k=%d beta=%g; returning best so far", k, beta)
    return ParisiMinimum(profile, float(value), converged, evaluations)


# -- zero temperature -------------------------------------------------------

FIT_DEGREE = {"affine": 1, "quadratic": 2}


@dataclass
class PstarEstimate:
    beta_ladder: list[float]
    values: list[float]
    fit_kind: str
    pstar: float
    residual: float
    profiles: list[RsbProfile] = field(default_factory=list)
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "beta_ladder": self.beta_ladder,
            "values": self.values,
            "fit_kind": self.fit_kind,
            "pstar": self.pstar,
            "residual": self.residual,
            "converged": self.converged,
            "profiles": [p.to_dict() for p in self.profiles],
        }


def extrapolate(betas: Sequence[float], values: Sequence[float], fit_kind: str = "affine"):
    """Fit values against 1/beta; returns (intercept, rms residual)."""
    if fit_kind not in FIT_DEGREE:
        raise ValueError(f"fit_kind must be one of {sorted(FIT_DEGREE)}")
    betas = np.asarray(betas, dtype=float)
    if len(betas) < 3 or np.any(np.diff(betas) <= 0):
        raise ValueError("beta ladder must be strictly increasing with at least 3 points")
    deg = FIT_DEGREE[fit_kind]
    if len(betas) < deg + 1:
        raise ValueError(f"{fit_kind} fit needs at least {deg + 1} distinct betas")
    h = 1.0 / betas
    design = np.vander(h, deg + 1)
    if np.linalg.cond(design) > 1e10:
        raise ValueError("ill-conditioned extrapolation")
    coef, *_ = np.linalg.lstsq(design, np.asarray(values, dtype=float), rcond=None)
    resid = np.asarray(values) - design @ coef
    return float(coef[-1]), float(np.sqrt(np.mean(resid**2)))


def estimate_pstar(beta_ladder: Sequence[float], k: int = 3, fit_kind: str = "affine",
                   opts: OptimizerSettings | None = None) -> PstarEstimate:
    """Minimize at each beta (warm-started along the ladder) and extrapolate to 1/beta = 0."""
    betas = [float(b) for b in beta_ladder]
    extrapolate(betas, np.zeros(len(betas)), fit_kind)  # validate ladder up front
    opts = opts or OptimizerSettings()
    values, profiles, converged = [], [], True
    prev: RsbProfile | None = None
    for beta in betas:
        res = minimize_parisi(k, beta, opts, init=[prev] if prev is not None else [])
        values.append(res.value)
        profiles.append(res.profile)
        converged &= res.converged
        prev = res.profile
    pstar, residual = extrapolate(betas, values, fit_kind)
    return PstarEstimate(betas, values, fit_kind, pstar, residual, profiles, converged)
