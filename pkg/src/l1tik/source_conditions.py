"""Smoothness machinery: dual witness sequences, the rate function, and
direct numerical checks of the governing inequalities.

The rate function has the form

    phi(t) = 2 * inf_n ( tail(n) + gamma_n * t ),

combining the decay of the true solution (through its tail sums) with a
nondecreasing sequence gamma_n bounding dual witness norms.  For the
neighbor-sum operator the witnesses are constructed explicitly by a
backward recursion with gamma_n = n; for identity/embedding/diagonal
operators the source elements are known in closed form.
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .operators import (
    BidiagonalSum,
    Diagonal,
    Embedding,
    Identity,
    OperatorSpec,
    OperatorTruncation,
    assemble,
)
from .sequences import Norm, SequenceModel, as_sequence, vector_norm

__all__ = [
    "SmoothnessProfile",
    "PhiValue",
    "phi_eval",
    "phi_values",
    "GammaMode",
    "gamma_from_sources",
    "standard_sources",
    "TailMode",
    "Property1Witness",
    "property1_witness_bidiagonal",
    "WitnessCertificate",
    "certify_witness",
    "ViolationReport",
    "vsc_check",
    "FirstLemmaResult",
    "firstlemma_check",
]

_SIGNED_SUP_MAX_N = 12


@dataclass(frozen=True)
class SmoothnessProfile:
    """Tail sums of the true solution paired with a witness-norm sequence.

    ``tail(n)`` must be nonincreasing and nonnegative, ``gamma(n)``
    positive and nondecreasing (the concavity of the resulting rate
    function hinges on this); both are validated on 1..n_max at
    construction.
    """

    tail: Callable[[int], float]
    gamma: Callable[[int], float]
    n_max: int

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        t, g = self.tails, self.gammas  # also populates the caches
        if np.any(t < 0) or np.any(np.diff(t) > 1e-15):
            raise ValueError("tail sums must be nonnegative and nonincreasing")
        if np.any(g <= 0) or np.any(np.diff(g) < -1e-15):
            raise ValueError("gamma sequence must be positive and nondecreasing")

    @cached_property
    def tails(self) -> np.ndarray:
        v = np.array([self.tail(n) for n in range(1, self.n_max + 1)], dtype=float)
        v.setflags(write=False)
        return v

    @cached_property
    def gammas(self) -> np.ndarray:
        v = np.array([self.gamma(n) for n in range(1, self.n_max + 1)], dtype=float)
        v.setflags(write=False)
        return v

    @classmethod
    def from_model(cls, model: SequenceModel, gamma: Optional[Callable[[int], float]] = None,
                   n_max: int = 1000) -> "SmoothnessProfile":
        """Profile for a decay model; gamma defaults to the linear bound n."""
        return cls(tail=model.tail_sum, gamma=gamma or (lambda n: float(n)), n_max=n_max)


PhiValue = namedtuple("PhiValue", ["value", "argmin_n"])


def phi_eval(profile: SmoothnessProfile, t: float) -> PhiValue:
    """Rate function 2 * min_n (tail(n) + gamma_n t) with the minimizing n."""
    if t < 0:
        raise ValueError(f"argument must be nonnegative, got {t}")
    vals = profile.tails + profile.gammas * t
    j = int(np.argmin(vals))
    return PhiValue(2.0 * float(vals[j]), j + 1)


def phi_values(profile: SmoothnessProfile, ts) -> np.ndarray:
    """Vectorized rate-function evaluation over a grid."""
    ts = np.asarray(ts, dtype=float)
    if np.any(ts < 0):
        raise ValueError("arguments must be nonnegative")
    grid = profile.tails[None, :] + profile.gammas[None, :] * ts[:, None]
    return 2.0 * grid.min(axis=1)


class GammaMode(str, Enum):
    SUM = "sum"
    SIGNED_SUP = "signed-sup"


def gamma_from_sources(sources, n: int, mode: GammaMode = GammaMode.SUM,
                       dual_norm: Norm = Norm.L2) -> float:
    """Witness-norm bound from explicit source elements f^(1)..f^(n).

    SUM adds the individual dual norms; SIGNED_SUP maximizes the dual norm
    of signed subsums over all sign patterns in {-1, 0, 1}^n by exhaustive
    enumeration (n <= 12).
    """
    mode = GammaMode(mode)
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if n > len(sources):
        raise ValueError(f"only {len(sources)} source elements given, n = {n}")
    f = np.stack([as_sequence(s, name="source") for s in sources[:n]])
    if mode == GammaMode.SUM:
        return float(sum(vector_norm(row, dual_norm) for row in f))
    if n > _SIGNED_SUP_MAX_N:
        raise ValueError(
            f"exhaustive sign enumeration capped at n = {_SIGNED_SUP_MAX_N}, got {n}"
        )
    signs = np.array(np.meshgrid(*([[-1.0, 0.0, 1.0]] * n), indexing="ij"))
    combos = signs.reshape(n, -1).T  # (3^n, n)
    best = 0.0
    ordv = {Norm.L1: 1, Norm.L2: 2, Norm.SUP: np.inf}[Norm(dual_norm)]
    for start in range(0, combos.shape[0], 65536):
        block = combos[start:start + 65536] @ f
        best = max(best, float(np.max(np.linalg.norm(block, ord=ordv, axis=1))))
    return best


def standard_sources(spec: OperatorSpec, count: int, n: int):
    """Closed-form source elements f^(k), k = 1..count, at truncation n.

    Available for identity, embedding, and diagonal operators (unit vectors,
    rescaled by the inverse singular values in the diagonal case).  The
    neighbor-sum and first-row-summation operators have no such closed form
    here; use the witness construction instead.
    """
    if count < 1 or count > n:
        raise ValueError(f"need 1 <= count <= n, got count={count}, n={n}")
    if isinstance(spec, (Identity, Embedding)):
        scale = [1.0] * count
    elif isinstance(spec, Diagonal):
        scale = [1.0 / spec.singular_value(k) for k in range(1, count + 1)]
    else:
        raise ValueError(f"no closed-form source elements for {spec.label}")
    out = []
    for k in range(1, count + 1):
        f = np.zeros(n)
        f[k - 1] = scale[k - 1]
        out.append(f)
    return out


class TailMode(str, Enum):
    ALTERNATING = "alternating"
    DECAYING = "decaying"


@dataclass(frozen=True)
class Property1Witness:
    """Dual element reproducing a head pattern under the adjoint.

    ``eta`` satisfies, for the neighbor-sum operator: the first
    ``head_length`` coordinates of A* eta equal the requested pattern
    exactly, the remaining coordinates stay within ``mu`` in magnitude,
    and ||eta||_sup <= gamma_bound.
    """

    eta: np.ndarray
    xi_head: np.ndarray
    head_length: int
    mu: float
    tail_mode: TailMode
    gamma_bound: float


def property1_witness_bidiagonal(xi_head, mu: float, tail_mode: TailMode,
                                 truncation: int) -> Property1Witness:
    """Witness for the neighbor-sum operator via the backward head recursion.

    Head: eta_1 = xi_1, eta_k = xi_k - eta_{k-1}.  The tail either
    alternates with constant magnitude |eta_n| (making the adjoint vanish
    identically beyond the head) or, in the decaying mode, takes the
    smallest-magnitude value inside the admissible band at every step, so
    the entries shrink by mu per index and reach zero.
    """
    xi = as_sequence(xi_head, name="xi_head")
    n = xi.size
    if np.any(np.abs(xi) > 1.0):
        raise ValueError("head pattern entries must lie in [-1, 1]")
    tail_mode = TailMode(tail_mode)
    if not 0 <= mu < 1:
        raise ValueError(f"mu must lie in [0, 1), got {mu}")
    if mu == 0 and tail_mode != TailMode.ALTERNATING:
        raise ValueError("mu = 0 admits only the alternating tail")
    if truncation < n:
        raise ValueError(f"truncation {truncation} shorter than head {n}")

    eta = np.zeros(truncation)
    eta[0] = xi[0]
    for k in range(1, n):
        eta[k] = xi[k] - eta[k - 1]

    prev = eta[n - 1]
    for k in range(n, truncation):
        if tail_mode == TailMode.ALTERNATING:
            eta[k] = -prev
        else:
            # admissible band is [-prev - mu, -prev + mu]; pick the value
            # closest to zero
            eta[k] = 0.0 if abs(prev) <= mu else -prev + np.sign(prev) * mu
        prev = eta[k]

    eta.setflags(write=False)
    return Property1Witness(eta=eta, xi_head=xi, head_length=n, mu=mu,
                            tail_mode=tail_mode, gamma_bound=float(n))


@dataclass(frozen=True)
class WitnessCertificate:
    head_error: float
    tail_max: float
    eta_sup: float
    head_exact: bool
    tail_ok: bool
    norm_ok: bool

    @property
    def ok(self) -> bool:
        return self.head_exact and self.tail_ok and self.norm_ok


def certify_witness(witness: Property1Witness, head_tol: float = 1e-14,
                    tail_tol: float = 1e-14, norm_tol: float = 1e-12) -> WitnessCertificate:
    """Verify the three witness properties by direct adjoint application."""
    trunc = witness.eta.size
    op = assemble(BidiagonalSum(), trunc)
    image = op.apply_adjoint(witness.eta)
    n = witness.head_length
    head_error = float(np.max(np.abs(image[:n] - witness.xi_head)))
    tail_max = float(np.max(np.abs(image[n:]))) if trunc > n else 0.0
    eta_sup = float(np.max(np.abs(witness.eta)))
    return WitnessCertificate(
        head_error=head_error,
        tail_max=tail_max,
        eta_sup=eta_sup,
        head_exact=head_error <= head_tol,
        tail_ok=tail_max <= witness.mu + tail_tol,
        norm_ok=eta_sup <= witness.gamma_bound + norm_tol,
    )


@dataclass(frozen=True)
class ViolationReport:
    """Outcome of sampling the variational smoothness inequality."""

    samples: int
    violations: int
    worst_margin: float  # max over samples of lhs - rhs; <= 0 means all hold
    beta: float

    @property
    def ok(self) -> bool:
        return self.violations == 0


def _sample_mixture(rng, x_true, count):
    """Adversarial test points: perturbations of the truth, sparse vectors,
    and dense Gaussian vectors at mixed scales."""
    n = x_true.size
    out = np.empty((count, n))
    for i in range(count):
        family = i % 3
        if family == 0:
            scale = 10.0 ** rng.uniform(-6, 1)
            if rng.random() < 0.5:
                direction = rng.standard_normal(n)
            else:
                direction = np.zeros(n)
                support = rng.choice(n, size=rng.integers(1, min(10, n) + 1), replace=False)
                direction[support] = rng.choice([-1.0, 1.0], size=support.size)
            nd = np.linalg.norm(direction)
            out[i] = x_true + scale * direction / (nd if nd > 0 else 1.0)
        elif family == 1:
            x = np.zeros(n)
            support = rng.choice(n, size=rng.integers(1, min(10, n) + 1), replace=False)
            x[support] = rng.uniform(-2.0, 2.0, size=support.size)
            out[i] = x
        else:
            out[i] = rng.standard_normal(n) * 10.0 ** rng.uniform(-3, 1)
    return out


def vsc_check(op: OperatorTruncation, x_true, profile: SmoothnessProfile,
              beta: float, samples: int = 1000, seed: int = 0) -> ViolationReport:
    """Sample the variational inequality

        beta ||x - x+||_1 <= ||x||_1 - ||x+||_1 + phi(||A(x - x+)||)

    over an adversarial mixture of test points (x+ denoting the true
    solution) and report violations.  The misfit is measured in the
    operator's declared image norm, which must match the norm the witness
    bounds were built for.
    """
    if not 0 < beta <= 1:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    if samples < 1:
        raise ValueError("need at least one sample")
    x_true = as_sequence(x_true, name="x_true")
    if x_true.size != op.n:
        raise ValueError("solution dimension does not match the operator")
    rng = np.random.default_rng(seed)
    xs = _sample_mixture(rng, x_true, samples)

    true_l1 = float(np.sum(np.abs(x_true)))
    diff = xs - x_true
    lhs = beta * np.sum(np.abs(diff), axis=1)
    image = diff @ op.matrix.T
    ordv = {Norm.L1: 1, Norm.L2: 2, Norm.SUP: np.inf}[op.image_norm]
    misfit = np.linalg.norm(image, ord=ordv, axis=1)
    rhs = np.sum(np.abs(xs), axis=1) - true_l1 + phi_values(profile, misfit)

    slack = 1e-12 * (1.0 + np.sum(np.abs(xs), axis=1) + true_l1)
    margins = lhs - rhs
    violations = int(np.sum(margins > slack))
    return ViolationReport(samples=samples, violations=violations,
                           worst_margin=float(np.max(margins)), beta=beta)


FirstLemmaResult = namedtuple("FirstLemmaResult", ["lhs", "rhs", "holds"])


def firstlemma_check(x, x_true, n: int) -> FirstLemmaResult:
    """Evaluate the base head/tail splitting inequality

        ||x - x+||_1 <= ||x||_1 - ||x+||_1
                        + 2 (sum_{k>n} |x+_k| + sum_{k<=n} |x_k - x+_k|)

    at truncation; it holds for every input up to float slack.
    """
    x = as_sequence(x, name="x")
    x_true = as_sequence(x_true, name="x_true")
    if x.size != x_true.size:
        raise ValueError("x and x_true must have equal dimension")
    if not 1 <= n <= x.size:
        raise ValueError(f"head length must lie in 1..{x.size}, got {n}")
    lhs = float(np.sum(np.abs(x - x_true)))
    head = float(np.sum(np.abs(x[:n] - x_true[:n])))
    tail = float(np.sum(np.abs(x_true[n:])))
    rhs = float(np.sum(np.abs(x)) - np.sum(np.abs(x_true)) + 2.0 * (tail + head))
    return FirstLemmaResult(lhs, rhs, lhs <= rhs + 1e-12)
