"""Finite matrix truncations of the library's operator family.

Every operator acts on the first N sequence coordinates via an explicit
N x N matrix; the adjoint is the transpose.  Ill-posedness of the underlying
infinite-dimensional equation shows up here as decay of the smallest singular
value with growing truncation level, which ``conditioning_scan`` measures.

A note on the summation operator ``BidiagonalSum`` (rows x_k + x_{k+1}): its
range in l1 is dense but not closed, yet individual unit vectors are
attainable — e.g. x = (-1, 1, 0, ...) solves A x = e^(2) exactly.  No single
right-hand side witnesses the ill-posedness; the degeneration of sigma_min
with N is the diagnostic this package relies on.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .sequences import Norm, as_sequence

__all__ = [
    "OperatorSpec",
    "Identity",
    "Embedding",
    "BidiagonalSum",
    "FirstRowSummation",
    "Diagonal",
    "OperatorTruncation",
    "assemble",
    "from_matrix",
    "operator_norm_estimate",
    "ConditioningReport",
    "conditioning_scan",
    "weak_star_diagnostic",
]

_SVD_MAX_N = 2000
_POWER_ITER_SEED = 42
_POWER_ITER_MAX = 10_000


class OperatorSpec(ABC):
    """Named operator family member; knows how to build its truncations."""

    @abstractmethod
    def build_matrix(self, n: int) -> np.ndarray:
        """Dense N x N truncation matrix."""

    @property
    def label(self) -> str:
        return type(self).__name__


@dataclass(frozen=True)
class Identity(OperatorSpec):
    """Well-posed reference case: the identity on the first N coordinates."""

    def build_matrix(self, n: int) -> np.ndarray:
        return np.eye(n)


@dataclass(frozen=True)
class Embedding(OperatorSpec):
    """Coordinate embedding into an l^q image space (a denoising setup).

    The matrix is the identity; ``q`` records the image-space geometry and
    fixes the dual exponent used when building source elements.
    """

    q: float = 2.0

    def __post_init__(self):
        if not 1 <= self.q < np.inf:
            raise ValueError(f"embedding exponent must satisfy 1 <= q < inf, got {self.q}")

    def build_matrix(self, n: int) -> np.ndarray:
        return np.eye(n)

    @property
    def label(self) -> str:
        return f"Embedding(q={self.q:g})"


@dataclass(frozen=True)
class BidiagonalSum(OperatorSpec):
    """Neighbor-sum operator, rows [Ax]_k = x_k + x_{k+1} (last row truncated)."""

    def build_matrix(self, n: int) -> np.ndarray:
        a = np.eye(n)
        a[np.arange(n - 1), np.arange(1, n)] = 1.0
        return a


@dataclass(frozen=True)
class FirstRowSummation(OperatorSpec):
    """First image coordinate sums all of x; remaining rows copy coordinates.

    The full-sum row prevents any bounded extension beyond l1 and breaks the
    usual continuity diagnostics, which is why it serves as the
    counterexample in ``weak_star_diagnostic``.
    """

    def build_matrix(self, n: int) -> np.ndarray:
        a = np.eye(n)
        a[0, :] = 1.0
        return a


@dataclass(frozen=True)
class Diagonal(OperatorSpec):
    """Diagonal operator with positive singular values.

    Exactly one of ``values`` (explicit per-coordinate singular values) or
    ``power`` (rule sigma_k = k**(-power)) must be given.
    """

    values: Optional[tuple] = None
    power: Optional[float] = None

    def __post_init__(self):
        if (self.values is None) == (self.power is None):
            raise ValueError("give exactly one of values= or power=")
        if self.values is not None:
            vals = tuple(float(v) for v in self.values)
            if len(vals) == 0 or any(not v > 0 for v in vals):
                raise ValueError("diagonal values must be positive")
            object.__setattr__(self, "values", vals)

    def singular_value(self, k: int) -> float:
        if self.values is not None:
            if k > len(self.values):
                raise ValueError(
                    f"diagonal has {len(self.values)} explicit values, index {k} requested"
                )
            return self.values[k - 1]
        return float(k) ** (-self.power)

    def build_matrix(self, n: int) -> np.ndarray:
        return np.diag([self.singular_value(k) for k in range(1, n + 1)])

    @property
    def label(self) -> str:
        if self.power is not None:
            return f"Diagonal(power={self.power:g})"
        return f"Diagonal(values={len(self.values)})"


@dataclass(frozen=True)
class OperatorTruncation:
    """Assembled finite operator: matrix, image norm, and originating spec.

    Immutable after assembly (the matrix is marked read-only), so instances
    are safe to share across rate-study workers.
    """

    matrix: np.ndarray
    image_norm: Norm = Norm.L2
    spec: Optional[OperatorSpec] = None
    label: str = field(default="matrix")

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2:
            raise ValueError(f"operator matrix must be 2-D, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("operator matrix contains non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "image_norm", Norm(self.image_norm))

    @property
    def n(self) -> int:
        """Domain dimension (truncation level for square zoo operators)."""
        return self.matrix.shape[1]

    @property
    def n_image(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"operator expects dimension {self.n}, got {x.shape}")
        return self.matrix @ x

    def apply_adjoint(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n_image,):
            raise ValueError(f"adjoint expects dimension {self.n_image}, got {y.shape}")
        return self.matrix.T @ y


def assemble(spec: OperatorSpec, n: int, image_norm: Norm = Norm.L2) -> OperatorTruncation:
    """Build the N x N truncation of ``spec`` with the given image norm."""
    if n < 1:
        raise ValueError(f"truncation level must be >= 1, got {n}")
    return OperatorTruncation(spec.build_matrix(n), image_norm=image_norm, spec=spec,
                              label=spec.label)


def from_matrix(matrix, image_norm: Norm = Norm.L2, label: str = "matrix") -> OperatorTruncation:
    """Wrap an explicit (possibly rectangular) matrix as an operator."""
    return OperatorTruncation(matrix, image_norm=image_norm, spec=None, label=label)


def operator_norm_estimate(op: OperatorTruncation, tol: float = 1e-6) -> float:
    """Largest singular value via power iteration on A^T A.

    Deterministically seeded; stops when the Rayleigh estimate is stable to a
    relative ``tol/2`` between sweeps and returns the estimate inflated by
    (1 + tol) so the result does not undershoot the true norm by more than a
    factor (1 + tol) on the operator family covered here.
    """
    if not tol > 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    a = op.matrix
    rng = np.random.default_rng(_POWER_ITER_SEED)
    v = rng.standard_normal(op.n)
    v /= np.linalg.norm(v)
    sigma2 = 0.0
    for _ in range(_POWER_ITER_MAX):
        w = a @ v
        sigma2_new = float(w @ w)  # Rayleigh quotient of A^T A at unit v
        u = a.T @ w
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0  # zero operator
        v = u / nu
        if sigma2_new > 0 and abs(sigma2_new - sigma2) <= 0.5 * tol * sigma2_new:
            return float(np.sqrt(sigma2_new)) * (1.0 + tol)
        sigma2 = sigma2_new
    raise ArithmeticError(
        f"power iteration did not stabilize within {_POWER_ITER_MAX} sweeps; "
        "the input looks degenerate"
    )


@dataclass(frozen=True)
class ConditioningReport:
    """Smallest-singular-value decay across a grid of truncation levels."""

    label: str
    n_values: tuple
    sigma_min: tuple
    growth_exponent: float  # slope of log(1/sigma_min) against log N
    verdict: str  # "degenerating" | "stable"

    @property
    def degenerating(self) -> bool:
        return self.verdict == "degenerating"


def conditioning_scan(spec: OperatorSpec, n_grid) -> ConditioningReport:
    """Probe sigma_min(A_N) over increasing N as an ill-posedness proxy.

    The verdict is "degenerating" when sigma_min drops by at least 10x from
    the smallest to the largest truncation.  Dense SVD limits the grid to
    N <= 2000.
    """
    grid = [int(n) for n in n_grid]
    if len(grid) == 0:
        raise ValueError("truncation grid must be nonempty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("truncation grid must be strictly increasing")
    if grid[-1] > _SVD_MAX_N:
        raise ValueError(f"dense SVD scan capped at N = {_SVD_MAX_N}, got {grid[-1]}")
    sigmas = []
    for n in grid:
        sv = np.linalg.svd(spec.build_matrix(n), compute_uv=False)
        smin = float(sv[-1])
        if not smin > 0:
            raise ArithmeticError(f"truncation N={n} of {spec.label} is singular")
        sigmas.append(smin)
    if len(grid) >= 2:
        slope = float(np.polyfit(np.log(grid), np.log(1.0 / np.array(sigmas)), 1)[0])
    else:
        slope = float("nan")
    verdict = "degenerating" if sigmas[0] / sigmas[-1] >= 10.0 else "stable"
    return ConditioningReport(spec.label, tuple(grid), tuple(sigmas), slope, verdict)


def weak_star_diagnostic(spec: OperatorSpec, k_max: int, probe="constant-one") -> np.ndarray:
    """Pairings <probe, A e^(k)> for k = 1..k_max.

    Decay of the pairings along a vanishing probe — against non-decay for a
    bounded non-vanishing probe such as the constant-one flag — is the finite
    stand-in for the operator's weak-star continuity behavior.
    """
    if k_max < 1:
        raise ValueError(f"need k_max >= 1, got {k_max}")
    if isinstance(probe, str):
        if probe != "constant-one":
            raise ValueError(f"unknown probe flag {probe!r}")
        xi = np.ones(k_max)
    else:
        xi = as_sequence(probe, name="probe")
        if xi.size < k_max:
            raise ValueError(f"probe has dimension {xi.size} < k_max = {k_max}")
    a = spec.build_matrix(xi.size)
    return (xi @ a)[:k_max]
