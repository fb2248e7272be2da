"""Finite-difference solution of the Parisi PDE.

Solves, backward from q = 1 to q = 0,

    f_q + (1/2) f_yy + (1/2) x(q) f_y**2 = 0,    f(1, y) = log(2 cosh(beta y)) / beta

on [-L, L] with reflecting walls.  Each q-step is a Crank-Nicolson step on
the diffusion term together with the nonlinear term written as an advection
``(1/2) x v f_y`` whose velocity ``v`` approximates ``f_y`` at the half step
(predictor-corrector).  Centered differences throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .profile import RsbProfile

#: Number of initial fully implicit steps that damp the Crank-Nicolson
#: oscillation caused by the sharp log-cosh terminal condition.
STARTUP_STEPS = 4


def log2cosh(y, beta: float):
    """Overflow-free ``log(2 cosh(beta y)) / beta``."""
    a = beta * np.abs(y)
    return (a + np.log1p(np.exp(-2.0 * a))) / beta


@dataclass(frozen=True)
class PdeGrid:
    """Grid geometry: ``dy`` spacing in y, ``dq`` maximum step in q, ``half_width`` L."""

    dy: float
    dq: float
    half_width: float

    @classmethod
    def default(cls, beta: float) -> "PdeGrid":
        return cls(dy=0.01 * max(1.0, 1.0 / beta), dq=1.0 / 512, half_width=6.0 + 3.0 * beta)

    def refined(self) -> "PdeGrid":
        return PdeGrid(self.dy / 2, self.dq / 2, self.half_width)

    def coarsened(self) -> "PdeGrid":
        return PdeGrid(self.dy * 2, self.dq * 2, self.half_width)


@dataclass
class PdeField:
    y_grid: np.ndarray
    q_grid: np.ndarray
    values: np.ndarray  # values[i, j] = f(q_grid[i], y_grid[j])
    profile: RsbProfile
    grid: PdeGrid
    error_estimate: float = float("nan")

    @property
    def origin(self) -> float:
        """f(0, 0)."""
        return float(self.values[0, len(self.y_grid) // 2])


class StabilityError(ValueError):
    pass


def check_grid(profile: RsbProfile, grid: PdeGrid) -> None:
    min_width = 6.0 + 3.0 * profile.beta
    if grid.half_width < min_width:
        raise ValueError(f"half_width {grid.half_width} < 6 + 3*beta = {min_width}")
    xmax = float(profile.m[-1])
    if xmax * grid.dy > 1.0:
        raise StabilityError(
            f"cell Peclet bound violated: max(x)*dy = {xmax * grid.dy:.3g} > 1")
    if xmax * grid.dq > 1.0:
        raise StabilityError(
            f"velocity-lag bound violated: max(x)*dq = {xmax * grid.dq:.3g} > 1")


def _solve(profile: RsbProfile, grid: PdeGrid, keep_rows: bool):
    beta = profile.beta
    npts = int(round(grid.half_width / grid.dy))
    y = np.linspace(-grid.half_width, grid.half_width, 2 * npts + 1)
    dy = y[1] - y[0]
    size = len(y)
    f = log2cosh(y, beta)
    rows, qs = [f], [1.0]

    diff = 0.5 / dy**2
    ab = np.empty((3, size))

    def grad(u):
        g = np.empty_like(u)
        g[1:-1] = (u[2:] - u[:-2]) / (2 * dy)
        g[0] = g[-1] = 0.0
        return g

    def apply(u, lower, upper):
        # A u with A = (1/2) D2 + (1/2) x v D1 and mirrored ghost nodes at the walls
        r = np.empty_like(u)
        r[1:-1] = lower[1:-1] * u[:-2] - 2 * diff * u[1:-1] + upper[1:-1] * u[2:]
        r[0] = 2 * diff * (u[1] - u[0])
        r[-1] = 2 * diff * (u[-2] - u[-1])
        return r

    first = True
    for level in range(profile.k, 0, -1):
        lo, hi = profile.q[level - 1], profile.q[level]
        x = profile.m[level - 1]
        nsteps = max(1, int(np.ceil((hi - lo) / grid.dq - 1e-9)))
        h = (hi - lo) / nsteps
        for step in range(nsteps):
            theta = 1.0 if (first and step < STARTUP_STEPS) else 0.5
            v = grad(f)
            for _ in range(2):
                adv = 0.25 * x * v / dy
                lower, upper = diff - adv, diff + adv
                rhs = f + h * (1 - theta) * apply(f, lower, upper) if theta < 1 else f.copy()
                ab[1] = 1 + h * theta * 2 * diff
                ab[0, 1:] = -h * theta * upper[:-1]
                ab[2, :-1] = -h * theta * lower[1:]
                ab[0, 1] = -h * theta * 2 * diff
                ab[2, -2] = -h * theta * 2 * diff
                new = solve_banded((1, 1), ab, rhs, check_finite=False)
                v = grad(0.5 * (f + new)) if theta < 1 else grad(new)
            f = new
            if keep_rows:
                rows.append(f)
                qs.append(hi - (step + 1) * h)
        first = False
    if not keep_rows:
        rows, qs = [f], [0.0]
    return y, np.array(qs[::-1]), np.array(rows[::-1])


def solve_pde(profile: RsbProfile, grid: PdeGrid | None = None, *,
              keep_rows: bool = True, estimate_error: bool = True) -> PdeField:
    """Integrate the Parisi PDE for ``profile`` on ``grid`` (default grid if None).

    Every interval ``[q_{l-1}, q_l]`` is split into equal steps no longer than
    ``grid.dq``.  With ``estimate_error`` the solve is repeated on the grid
    coarsened by two in both directions and the Richardson estimate
    ``|f_h(0,0) - f_2h(0,0)| / 3`` is stored on the field.
    """
    grid = grid or PdeGrid.default(profile.beta)
    check_grid(profile, grid)
    y, qs, rows = _solve(profile, grid, keep_rows)
    field = PdeField(y, qs, rows, profile, grid)
    if estimate_error:
        coarse = grid.coarsened()
        try:
            check_grid(profile, coarse)
        except StabilityError:
            return field
        _, _, crow = _solve(profile, coarse, keep_rows=False)
        field.error_estimate = abs(field.origin - float(crow[0, crow.shape[1] // 2])) / 3.0
    return field
