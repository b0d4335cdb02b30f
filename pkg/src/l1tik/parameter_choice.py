"""Regularization-parameter rules.

Two choices are provided: the a priori rule alpha(delta) = delta^p / phi(delta)
built from a concave rate function phi, and the sequential discrepancy
principle, which walks the geometric grid alpha_j = q^j alpha_0 until the
data misfit of the regularized solution first drops to tau * delta and the
previous grid point still exceeds it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .sequences import vector_norm
from .solver import TikhonovProblem, solve_tikhonov

__all__ = [
    "APrioriRule",
    "alpha_a_priori",
    "check_regularization_property",
    "SDPRule",
    "SDPFlag",
    "SDPResult",
    "DiscrepancyUnreachableError",
    "default_alpha0",
    "discrepancy",
    "alpha_sdp",
]

_PHI_PROBE_GRID = np.logspace(-6, 0, 25)


def _validate_index_function(phi: Callable[[float], float], grid=_PHI_PROBE_GRID) -> None:
    """Check phi(0) = 0, strict increase, and midpoint concavity on a grid."""
    at_zero = phi(0.0)
    if not abs(at_zero) <= 1e-9:
        raise ValueError(f"phi(0) must vanish, got {at_zero}")
    vals = np.array([phi(float(t)) for t in grid])
    if np.any(np.diff(vals) <= 0):
        raise ValueError("phi must be strictly increasing on the probe grid")
    mid = np.array([phi(float(0.5 * (a + b))) for a, b in zip(grid[:-1], grid[1:])])
    if np.any(mid + 1e-12 < 0.5 * (vals[:-1] + vals[1:])):
        raise ValueError("phi must be midpoint-concave on the probe grid")


@dataclass(frozen=True)
class APrioriRule:
    """A priori rule alpha(delta) = delta^p / phi(delta) for concave phi."""

    p: float
    phi: Callable[[float], float]

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError(f"misfit exponent must be >= 1, got {self.p}")
        _validate_index_function(self.phi)


def alpha_a_priori(rule: APrioriRule, delta: float) -> float:
    if not delta > 0:
        raise ValueError(f"noise level must be positive, got {delta}")
    phi_delta = rule.phi(delta)
    if not phi_delta > 0:
        raise ValueError(f"phi({delta}) = {phi_delta} is not positive")
    return delta ** rule.p / phi_delta


def check_regularization_property(rule: APrioriRule, deltas=None):
    """Verify alpha(delta) and delta^p / alpha(delta) both decrease to zero.

    Returns (alphas, ratios, ok) on the given decreasing delta grid
    (default 1e-1 .. 1e-6).
    """
    if deltas is None:
        deltas = np.logspace(-1, -6, 11)
    deltas = np.asarray(deltas, dtype=float)
    alphas = np.array([alpha_a_priori(rule, d) for d in deltas])
    ratios = deltas ** rule.p / alphas  # equals phi(delta) by construction
    ok = bool(np.all(np.diff(alphas) < 0) and np.all(np.diff(ratios) < 0))
    return alphas, ratios, ok


class SDPFlag(str, Enum):
    BRACKETED = "bracketed"
    LEFT_BRACKET_MISSING = "left-bracket-missing"


class DiscrepancyUnreachableError(RuntimeError):
    """No grid point reached the discrepancy target within the step budget.

    Signals that the noise level is too small for the truncation, or the
    multiplier tau too tight, for data compatibility to hold.
    """


@dataclass(frozen=True)
class SDPRule:
    """Sequential discrepancy principle parameters.

    ``alpha0=None`` selects twice the sup-norm of the adjoint applied to the
    data, which forces the zero solution at the grid start for p = 2 and so
    anchors the walk at the maximal discrepancy.
    """

    tau: float = 1.5
    q: float = 0.5
    alpha0: Optional[float] = None
    j_max: int = 60

    def __post_init__(self):
        if not self.tau > 1:
            raise ValueError(f"tau must exceed 1, got {self.tau}")
        if not 0 < self.q < 1:
            raise ValueError(f"q must lie in (0, 1), got {self.q}")
        if self.alpha0 is not None and not self.alpha0 > 0:
            raise ValueError(f"alpha0 must be positive, got {self.alpha0}")
        if self.j_max < 1:
            raise ValueError(f"j_max must be >= 1, got {self.j_max}")


def default_alpha0(problem: TikhonovProblem) -> float:
    """Grid start 2 ||A^T y||_inf (zero-solution threshold for p = 2)."""
    a0 = 2.0 * float(np.max(np.abs(problem.op.apply_adjoint(problem.data))))
    if a0 == 0.0:
        raise ValueError("data is identically zero; no sensible grid start")
    return a0


def discrepancy(problem: TikhonovProblem, x) -> float:
    """Residual size ||A x - y|| in the problem's declared image norm."""
    return vector_norm(problem.op.apply(x) - problem.data, problem.op.image_norm)


@dataclass
class SDPResult:
    alpha: float
    flag: SDPFlag
    trace: tuple  # ((alpha_j, discrepancy_j), ...) in walk order
    solution: np.ndarray
    discrepancy: float
    converged_all: bool
    max_certificate_violation: float
    solves: int


def alpha_sdp(
    rule: SDPRule,
    problem: TikhonovProblem,
    delta: float,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    gram=None,
    lipschitz=None,
    warm_start: bool = True,
) -> SDPResult:
    """Walk the geometric grid until the discrepancy first drops to tau*delta.

    The problem's own alpha is ignored; each grid point alpha_j = q^j alpha_0
    is solved (warm-started from the previous minimizer by default) and its
    discrepancy recorded.  On success the returned alpha satisfies
    d(alpha) <= tau*delta < d(alpha/q).  When already the grid start meets
    the target the left bracket cannot be established; alpha_1 is returned
    carrying the ``LEFT_BRACKET_MISSING`` flag.  If the target is never met
    within ``j_max`` steps a ``DiscrepancyUnreachableError`` is raised.
    """
    if not delta > 0:
        raise ValueError(f"noise level must be positive, got {delta}")
    alpha0 = rule.alpha0 if rule.alpha0 is not None else default_alpha0(problem)
    target = rule.tau * delta

    trace = []
    converged_all = True
    max_cert = 0.0
    x_prev = None
    solves = 0

    def solve_at(alpha_j):
        nonlocal converged_all, max_cert, x_prev, solves
        prob_j = problem.with_alpha(alpha_j)
        x, diag = solve_tikhonov(
            prob_j, tol=tol, max_iter=max_iter,
            x0=x_prev if warm_start else None,
            gram=gram, lipschitz=lipschitz,
        )
        solves += 1
        converged_all = converged_all and diag.converged
        max_cert = max(max_cert, diag.certificate_violation)
        x_prev = x
        d = discrepancy(prob_j, x)
        trace.append((alpha_j, d))
        return x, d

    x0_sol, d0 = solve_at(alpha0)
    if d0 <= target:
        # grid start already meets the target: no left bracket exists
        x1, d1 = solve_at(rule.q * alpha0)
        return SDPResult(rule.q * alpha0, SDPFlag.LEFT_BRACKET_MISSING, tuple(trace),
                         x1, d1, converged_all, max_cert, solves)

    for j in range(1, rule.j_max + 1):
        alpha_j = rule.q ** j * alpha0
        x_j, d_j = solve_at(alpha_j)
        if d_j <= target:
            return SDPResult(alpha_j, SDPFlag.BRACKETED, tuple(trace), x_j, d_j,
                             converged_all, max_cert, solves)
    raise DiscrepancyUnreachableError(
        f"discrepancy stayed above tau*delta = {target:.3e} for all {rule.j_max} "
        f"grid steps from alpha0 = {alpha0:.3e}"
    )
