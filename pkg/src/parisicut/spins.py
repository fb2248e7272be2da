"""Spin configurations sigma in {-1, +1}^n."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class SpinConfig:
    """A +-1 assignment with its half-difference ``m = sum(sigma) / 2`` cached."""

    sigma: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sigma)
        if s.ndim != 1 or not np.all(np.abs(s) == 1):
            raise ValueError("sigma must be a 1-d array of +-1")
        s = s.astype(np.int8)
        s.setflags(write=False)
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "_total", int(s.sum(dtype=np.int64)))

    @property
    def n(self) -> int:
        return len(self.sigma)

    @property
    def m(self) -> int | float:
        """Half-difference between the + and - class sizes."""
        return self._total // 2 if self._total % 2 == 0 else self._total / 2

    @property
    def balanced(self) -> bool:
        return self._total == 0

    def __eq__(self, other) -> bool:
        return isinstance(other, SpinConfig) and np.array_equal(self.sigma, other.sigma)

    def __hash__(self) -> int:
        return hash(self.sigma.tobytes())

    def __neg__(self) -> "SpinConfig":
        return SpinConfig(-self.sigma)

    def to_list(self) -> list[int]:
        return self.sigma.astype(int).tolist()

    @classmethod
    def random_balanced(cls, n: int, rng: np.random.Generator) -> "SpinConfig":
        if n % 2:
            raise ValueError("balanced configurations need even n")
        s = np.ones(n, dtype=np.int8)
        s[rng.choice(n, n // 2, replace=False)] = -1
        return cls(s)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "SpinConfig":
        return cls(rng.choice(np.array([-1, 1], dtype=np.int8), size=n))

    @classmethod
    def from_bits(cls, bits: int, n: int) -> "SpinConfig":
        """sigma_i = +1 where bit i is 0, -1 where it is 1."""
        b = (bits >> np.arange(n)) & 1
        return cls((1 - 2 * b).astype(np.int8))


def as_spins(s) -> SpinConfig:
    return s if isinstance(s, SpinConfig) else SpinConfig(np.asarray(s))
