"""Step order parameters x(q) for the Parisi functional."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RsbProfile:
    """Piecewise-constant, nondecreasing x(q) with ``k`` levels.

    ``x(q) = m[l-1]`` on ``[q[l-1], q[l])``; breakpoints run from exactly 0 to
    exactly 1 and every level lies in ``[0, beta]``.
    """

    q: np.ndarray
    m: np.ndarray
    beta: float

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        m = np.asarray(self.m, dtype=float)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "beta", float(self.beta))
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if q.ndim != 1 or m.ndim != 1 or len(q) != len(m) + 1 or len(m) < 1:
            raise ValueError("need len(q) == len(m) + 1 >= 2")
        if q[0] != 0.0 or q[-1] != 1.0:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if np.any(np.diff(q) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(np.diff(m) < 0):
            raise ValueError("levels must be nondecreasing")
        if m[0] < 0 or m[-1] > self.beta * (1 + 1e-12):
            raise ValueError(f"levels must lie in [0, beta={self.beta}]")

    @property
    def k(self) -> int:
        return len(self.m)

    @classmethod
    def constant(cls, value: float, beta: float) -> "RsbProfile":
        return cls(np.array([0.0, 1.0]), np.array([value]), beta)

    def x(self, q) -> np.ndarray:
        """Evaluate x at overlap values (right-continuous, x(1) = m_k)."""
        idx = np.searchsorted(self.q, np.asarray(q, dtype=float), side="right") - 1
        return self.m[np.clip(idx, 0, self.k - 1)]

    def correction(self) -> float:
        """Exact value of (1/2) * integral_0^1 q x(q) dq for the step function."""
        return 0.25 * float(np.sum(self.m * (self.q[1:] ** 2 - self.q[:-1] ** 2)))

    def split(self) -> "RsbProfile":
        """Same function with one more level: the widest interval is halved."""
        i = int(np.argmax(np.diff(self.q)))
        mid = 0.5 * (self.q[i] + self.q[i + 1])
        q = np.insert(self.q, i + 1, mid)
        m = np.insert(self.m, i, self.m[i])
        return RsbProfile(q, m, self.beta)

    def to_dict(self) -> dict:
        return {"k": self.k, "q": self.q.tolist(), "m": self.m.tolist(), "beta": self.beta}
