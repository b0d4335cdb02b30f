"""Finite truncations of summable sequences and analytic decay models.

Solution sequences are represented by plain 1-D float64 arrays holding the
first N coordinates (coordinate indices are 1-based everywhere in the public
API).  Decay models know their coordinates analytically, so tail sums beyond
any truncation level are available in closed form or with certified accuracy.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import zeta

__all__ = [
    "Norm",
    "vector_norm",
    "as_sequence",
    "soft_threshold",
    "SequenceModel",
    "Sparse",
    "PowerDecay",
    "ExponentialDecay",
]


class Norm(str, Enum):
    """Norm used on finite coordinate vectors."""

    L1 = "l1"
    L2 = "l2"
    SUP = "sup"


_NORM_ORD = {Norm.L1: 1, Norm.L2: 2, Norm.SUP: np.inf}


def vector_norm(x, kind: Norm = Norm.L2) -> float:
    """Norm of a finite coordinate vector under the given tag."""
    return float(np.linalg.norm(np.asarray(x, dtype=float), ord=_NORM_ORD[Norm(kind)]))


def as_sequence(values, name: str = "x") -> np.ndarray:
    """Validate and return a finite 1-D float64 coordinate vector.

    Rejects empty input, extra dimensions, and non-finite entries.  The
    returned array is a read-only copy, safe to share between threads.
    """
    x = np.array(values, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {x.shape}")
    if x.size < 1:
        raise ValueError(f"{name} must have at least one entry")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    x.setflags(write=False)
    return x


def soft_threshold(x, lam: float) -> np.ndarray:
    """Entrywise shrinkage sign(x_k) * max(|x_k| - lam, 0).

    This is the proximal map of lam * ||.||_1 and the inner step of the
    iterative solver.
    """
    if lam < 0:
        raise ValueError(f"threshold must be nonnegative, got {lam}")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


class SequenceModel(ABC):
    """Generative description of a summable solution sequence.

    Subclasses expose the k-th coordinate analytically, so both finite
    truncations and exact tail sums are available.
    """

    @abstractmethod
    def coefficient(self, k: int) -> float:
        """Coordinate value at 1-based index ``k``."""

    @abstractmethod
    def tail_sum(self, n: int) -> float:
        """Sum of |coefficients| at indices strictly greater than ``n``."""

    def materialize(self, n: int) -> np.ndarray:
        """First ``n`` coordinates as a read-only vector."""
        if n < 1:
            raise ValueError(f"truncation level must be >= 1, got {n}")
        x = np.array([self.coefficient(k) for k in range(1, n + 1)], dtype=float)
        x.setflags(write=False)
        return x

    def _check_tail_index(self, n: int) -> None:
        if n < 0:
            raise ValueError(f"tail index must be >= 0, got {n}")


@dataclass(frozen=True)
class Sparse(SequenceModel):
    """Finitely supported sequence: explicit values on 1-based support indices."""

    indices: tuple
    values: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        val = tuple(float(v) for v in self.values)
        if len(idx) != len(val):
            raise ValueError("indices and values must have equal length")
        if len(idx) == 0:
            raise ValueError("support must be nonempty")
        if any(i < 1 for i in idx):
            raise ValueError("support indices must be >= 1")
        if len(set(idx)) != len(idx):
            raise ValueError("support indices must be distinct")
        if not all(np.isfinite(val)):
            raise ValueError("support values must be finite")
        order = np.argsort(idx)
        object.__setattr__(self, "indices", tuple(idx[i] for i in order))
        object.__setattr__(self, "values", tuple(val[i] for i in order))

    @classmethod
    def from_dict(cls, entries) -> "Sparse":
        items = sorted(entries.items())
        return cls(tuple(k for k, _ in items), tuple(v for _, v in items))

    def coefficient(self, k: int) -> float:
        try:
            return self.values[self.indices.index(k)]
        except ValueError:
            return 0.0

    def materialize(self, n: int) -> np.ndarray:
        if n < 1:
            raise ValueError(f"truncation level must be >= 1, got {n}")
        x = np.zeros(n)
        for i, v in zip(self.indices, self.values):
            if i <= n:
                x[i - 1] = v
        x.setflags(write=False)
        return x

    def tail_sum(self, n: int) -> float:
        self._check_tail_index(n)
        return float(sum(abs(v) for i, v in zip(self.indices, self.values) if i > n))

    @property
    def max_index(self) -> int:
        return self.indices[-1]


@dataclass(frozen=True)
class PowerDecay(SequenceModel):
    """Coordinates scale * k**(-theta); summable only for theta > 1."""

    theta: float
    scale: float = 1.0

    def __post_init__(self):
        if not self.theta > 1:
            raise ValueError(f"power exponent must be > 1 for summability, got {self.theta}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    def coefficient(self, k: int) -> float:
        return self.scale * float(k) ** (-self.theta)

    def materialize(self, n: int) -> np.ndarray:
        if n < 1:
            raise ValueError(f"truncation level must be >= 1, got {n}")
        k = np.arange(1, n + 1, dtype=float)
        x = self.scale * k ** (-self.theta)
        x.setflags(write=False)
        return x

    def tail_sum(self, n: int) -> float:
        # Hurwitz zeta: zeta(theta, n+1) = sum_{k > n} k**(-theta), exact to
        # double precision, far inside the 1e-12 accuracy contract.
        self._check_tail_index(n)
        return self.scale * float(zeta(self.theta, n + 1))


@dataclass(frozen=True)
class ExponentialDecay(SequenceModel):
    """Coordinates scale * exp(-rate * k) with geometric tail sums."""

    rate: float
    scale: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"decay rate must be positive, got {self.rate}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    def coefficient(self, k: int) -> float:
        return self.scale * np.exp(-self.rate * k)

    def materialize(self, n: int) -> np.ndarray:
        if n < 1:
            raise ValueError(f"truncation level must be >= 1, got {n}")
        k = np.arange(1, n + 1, dtype=float)
        x = self.scale * np.exp(-self.rate * k)
        x.setflags(write=False)
        return x

    def tail_sum(self, n: int) -> float:
        self._check_tail_index(n)
        r = np.exp(-self.rate)
        return self.scale * r ** (n + 1) / (1.0 - r)
