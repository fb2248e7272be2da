"""Exact backward recursion for step profiles.

For x constant (= m) on an interval of length dq, the Cole-Hopf transform
solves the PDE exactly:

    f_prev(y) = (1/m) log E exp(m f(y + sqrt(dq) Z)),    Z ~ N(0, 1)

and ``f_prev = E f(y + sqrt(dq) Z)`` when m = 0.  Each level is tabulated on
a y-grid (f is even, so only y >= 0 is stored) and interpolated by a cubic
spline that continues linearly past the grid edge, where f is affine up to
exponentially small terms.

The Gaussian expectation is taken after the change of measure Z -> Z + mu
with mu = m s f'(y), which centers the tilted integrand at the quadrature
origin, followed by max-shifted log-sum-exp.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import logsumexp, roots_hermite

from .pde import log2cosh
from .profile import RsbProfile

#: Levels with m below this are averaged without tilt (the m -> 0 limit).
ZERO_LEVEL = 1e-10
RECURSION_HALF_WIDTH = 10.0
TRAPEZOID_RANGE = 9.0


@lru_cache(maxsize=32)
def gauss_hermite(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights with sum(w * g(z)) ~ E g(Z) for standard normal Z."""
    x, w = roots_hermite(nodes)
    return np.sqrt(2.0) * x, w / np.sqrt(np.pi)


@lru_cache(maxsize=64)
def trapezoid_rule(step: float, reach: float = TRAPEZOID_RANGE) -> tuple[np.ndarray, np.ndarray]:
    half = int(np.ceil(reach / step))
    z = step * np.arange(-half, half + 1)
    logw = -0.5 * z * z
    return z, np.exp(logw - logsumexp(logw))


def gaussian_rule(beta: float, spread: float, m: float, nodes: int):
    """Quadrature for E exp(m g(Z)) where g varies on the scale 1 / (beta * spread).

    Gauss-Hermite loses accuracy well before that scale reaches the node
    spacing near the origin (64 nodes already err by 1e-11 at beta * spread
    = 1), so outside a small range an equispaced rule, which converges
    geometrically for integrands analytic in a strip, is used.
    Its reach grows by m * spread because near y = 0 the tilted density is
    bimodal with modes at about +-m * spread that no single shift centers.
    """
    ratio = beta * spread
    if ratio <= np.sqrt(nodes) / 16.0:
        return gauss_hermite(nodes)
    step = min(0.25, 0.4 / ratio)
    reach = TRAPEZOID_RANGE + np.ceil(m * spread)
    return trapezoid_rule(round(step, 6), float(reach))


class _Level:
    """Even function tabulated on [0, L] with linear continuation."""

    def __init__(self, y: np.ndarray, f: np.ndarray):
        self.edge = y[-1]
        self.spline = CubicSpline(y, f, bc_type=((1, 0.0), (2, 0.0)))
        self.f_edge = f[-1]
        self.slope_edge = float(self.spline(self.edge, 1))

    def __call__(self, p):
        a = np.abs(p)
        inside = self.spline(np.minimum(a, self.edge))
        return np.where(a <= self.edge, inside, self.f_edge + self.slope_edge * (a - self.edge))

    def slope(self, p):
        a = np.abs(p)
        d = np.where(a <= self.edge, self.spline(np.minimum(a, self.edge), 1), self.slope_edge)
        return np.sign(p) * d


class _Boundary:
    def __init__(self, beta: float):
        self.beta = beta

    def __call__(self, p):
        return log2cosh(p, self.beta)

    def slope(self, p):
        return np.tanh(self.beta * p)


def _step(func, targets, m, spread, rule):
    z, w = rule
    if m <= ZERO_LEVEL:
        return func(targets[:, None] + spread * z[None, :]) @ w
    mu = m * spread * np.clip(func.slope(targets), -1.0, 1.0)
    pts = targets[:, None] + spread * (z[None, :] + mu[:, None])
    # nodes whose weight underflows to zero drop out via log(0) = -inf
    with np.errstate(divide="ignore"):
        logw = np.log(w)[None, :] + m * func(pts) - mu[:, None] * z[None, :] - 0.5 * (mu * mu)[:, None]
    return logsumexp(logw, axis=1) / m


def recursion_value(profile: RsbProfile, quad: int = 64, *, dy: float | None = None,
                    half_width: float = RECURSION_HALF_WIDTH) -> float:
    """f(0, 0; x) for a step profile by the backward Gaussian recursion.

    ``quad`` is the Gauss-Hermite order used wherever that rule is accurate
    (see :func:`gaussian_rule`).  ``dy`` defaults to min(0.01, 0.25 / beta).
    """
    if quad < 16:
        raise ValueError(f"quadrature node count must be >= 16, got {quad}")
    beta = profile.beta
    if dy is None:
        dy = min(0.01, 0.25 / beta)
    y = np.linspace(0.0, half_width, int(round(half_width / dy)) + 1)
    func = _Boundary(beta)
    f = None
    for level in range(profile.k, 0, -1):
        spread = float(np.sqrt(profile.q[level] - profile.q[level - 1]))
        targets = np.zeros(1) if level == 1 else y
        f = _step(func, targets, float(profile.m[level - 1]), spread,
                  gaussian_rule(beta, spread, float(profile.m[level - 1]), quad))
        if level > 1:
            func = _Level(y, f)
    return float(f[0])
