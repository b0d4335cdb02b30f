"""Scikit-learn compatible estimator facade over the solver.

The reconstruction problem is lasso-shaped, so it composes naturally with
the scikit-learn ecosystem: ``fit(X, y)`` treats X as the (dense) forward
matrix and y as the noisy data, exposing the minimizer through ``coef_``.
``L1Tikhonov`` solves at a fixed penalty weight; ``L1TikhonovSDP`` selects
the weight by the sequential discrepancy principle from a known noise level.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .operators import from_matrix
from .parameter_choice import SDPRule, alpha_sdp
from .sequences import Norm
from .solver import TikhonovProblem, solve_tikhonov

__all__ = ["L1Tikhonov", "L1TikhonovSDP"]


class L1Tikhonov(RegressorMixin, BaseEstimator):
    """Sparsity-penalized least-squares reconstruction at fixed alpha.

    Minimizes (1/p) ||X w - y||_2^p + alpha * penalty(w) where the penalty
    is ||w||_1, or 0.5 ||w||_2^2 + elastic_eta ||w||_1 when elastic_eta > 0.

    Parameters
    ----------
    alpha : float
        Penalty weight, > 0.
    p : float
        Misfit exponent; 2 (default) or larger.
    elastic_eta : float
        Elastic-variant weight; 0 keeps the pure l1 penalty.
    tol : float
        Proximal fixed-point residual at which the solve stops.
    max_iter : int
        Iteration budget.

    Attributes
    ----------
    coef_ : ndarray
        Minimizer.
    n_iter_ : int
        Iterations used.
    converged_ : bool
    objective_ : float
    """

    def __init__(self, alpha=1.0, p=2.0, elastic_eta=0.0, tol=1e-10, max_iter=100_000):
        self.alpha = alpha
        self.p = p
        self.elastic_eta = elastic_eta
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        problem = TikhonovProblem(op=from_matrix(X, image_norm=Norm.L2),
                                  data=y, alpha=self.alpha, p=self.p,
                                  elastic_eta=self.elastic_eta)
        coef, diag = solve_tikhonov(problem, tol=self.tol, max_iter=self.max_iter)
        self.coef_ = coef
        self.n_iter_ = diag.iterations
        self.converged_ = diag.converged
        self.objective_ = diag.objective
        self.diagnostics_ = diag
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_


class L1TikhonovSDP(RegressorMixin, BaseEstimator):
    """Reconstruction with the penalty weight chosen a posteriori.

    Walks alpha down a geometric grid until the residual ||X w - y||_2
    first drops to tau * delta, where delta is the known noise level.

    Attributes set by ``fit``: ``coef_``, ``alpha_``, ``sdp_flag_``,
    ``discrepancy_``, ``trace_``.
    """

    def __init__(self, delta=1e-2, tau=1.5, q=0.5, alpha0=None, j_max=60,
                 p=2.0, tol=1e-10, max_iter=100_000):
        self.delta = delta
        self.tau = tau
        self.q = q
        self.alpha0 = alpha0
        self.j_max = j_max
        self.p = p
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        problem = TikhonovProblem(op=from_matrix(X, image_norm=Norm.L2),
                                  data=y, alpha=1.0, p=self.p)
        rule = SDPRule(tau=self.tau, q=self.q, alpha0=self.alpha0, j_max=self.j_max)
        result = alpha_sdp(rule, problem, self.delta, tol=self.tol,
                           max_iter=self.max_iter)
        self.coef_ = result.solution
        self.alpha_ = result.alpha
        self.sdp_flag_ = result.flag.value
        self.discrepancy_ = result.discrepancy
        self.trace_ = result.trace
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_
