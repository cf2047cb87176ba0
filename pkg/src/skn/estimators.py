"""Scikit-learn style front ends.

The compilers are fit-shaped (a target table in, synthesized parameters
out) and evaluation is predict-shaped, so thin estimator wrappers make
the constructions compose with the wider ecosystem (``get_params``,
``clone``, pipelines). X is always a full target table, not a sample
matrix: a row-stochastic ``(2**k, 2**n)`` kernel, or a length ``2**n``
distribution for the input-free compiler.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import construct, fitting
from .core import check_binary_states, check_dist_vec, check_kernel, kernel_shape, tv_distance
from .evaluate import full_kernel


class KernelNetworkCompiler(BaseEstimator):
    """Compile network weights approximating a target Markov kernel.

    Parameters
    ----------
    construction : "fixed" or "free"
        Whether the output layer is the fixed orthant map or is tuned
        per target (the free construction uses half the hidden units
        and reports structural residuals).
    alpha : float or None
        Sharpness of the compiled weights; None picks one automatically.
    eta : float
        Interior floor applied to target rows before compiling.
    """

    def __init__(self, construction: str = "fixed", alpha: float | None = 40.0,
                 eta: float = 1e-3, ratio_tol: float = 1e-13):
        self.construction = construction
        self.alpha = alpha
        self.eta = eta
        self.ratio_tol = ratio_tol

    def fit(self, X, y=None):
        K = check_kernel(X)
        if self.construction == "fixed":
            self.network_ = construct.compile_fixed_output(K, alpha=self.alpha, eta=self.eta)
            self.residual_report_ = None
        elif self.construction == "free":
            self.network_, self.residual_report_ = construct.compile_free_output(
                K, alpha=self.alpha, eta=self.eta, ratio_tol=self.ratio_tol)
        else:
            raise ValueError(f"unknown construction {self.construction!r}")
        self.k_, self.n_ = kernel_shape(K)
        self.m_ = self.network_.m
        self.realized_ = full_kernel(self.network_)
        return self

    def _check_fitted(self):
        if not hasattr(self, "network_"):
            raise NotFittedError("call fit before using this estimator")

    def predict_proba(self, Y) -> np.ndarray:
        """Realized output distribution for each binary input row of Y."""
        self._check_fitted()
        Y = check_binary_states(Y, self.k_)
        idx = Y @ (1 << np.arange(self.k_, dtype=np.int64)) if self.k_ else np.zeros(len(Y), int)
        return self.realized_[idx]

    def score(self, X, y=None) -> float:
        """Negative max-row TV between the realized kernel and X."""
        self._check_fitted()
        K = check_kernel(X)
        return -max(tv_distance(K[i], self.realized_[i]) for i in range(K.shape[0]))


class DistributionNetworkCompiler(BaseEstimator):
    """Compile an input-free network realizing a target distribution."""

    def __init__(self, variant: str = "fixed", alpha: float | None = 40.0,
                 eta: float = 1e-3, ratio_tol: float = 1e-13):
        self.variant = variant
        self.alpha = alpha
        self.eta = eta
        self.ratio_tol = ratio_tol

    def fit(self, X, y=None):
        q = check_dist_vec(np.asarray(X, dtype=float).ravel())
        self.network_ = construct.compile_distribution(
            q, self.variant, alpha=self.alpha, eta=self.eta, ratio_tol=self.ratio_tol)
        self.n_ = self.network_.n
        self.m_ = self.network_.m
        self.realized_ = full_kernel(self.network_)[0]
        return self

    def predict_proba(self, X=None) -> np.ndarray:
        if not hasattr(self, "network_"):
            raise NotFittedError("call fit before using this estimator")
        return self.realized_

    def score(self, X, y=None) -> float:
        if not hasattr(self, "network_"):
            raise NotFittedError("call fit before using this estimator")
        return -tv_distance(check_dist_vec(np.asarray(X, dtype=float).ravel()), self.realized_)


class GradientKernelFitter(BaseEstimator):
    """Fit network weights to a target kernel by exact-gradient descent."""

    def __init__(self, hidden_units: int = 1, step_size: float = 1.0,
                 iterations: int = 500, restarts: int = 3,
                 init_scale: float = 0.5, seed: int = 0):
        self.hidden_units = hidden_units
        self.step_size = step_size
        self.iterations = iterations
        self.restarts = restarts
        self.init_scale = init_scale
        self.seed = seed

    def fit(self, X, y=None):
        K = check_kernel(X)
        cfg = fitting.FitConfig(step_size=self.step_size, iterations=self.iterations,
                                restarts=self.restarts, init_scale=self.init_scale,
                                seed=self.seed)
        self.network_, self.trace_ = fitting.fit(K, self.hidden_units, cfg)
        self.objective_ = self.trace_[-1]
        self.k_, self.n_ = kernel_shape(K)
        self.realized_ = full_kernel(self.network_)
        return self

    def predict_proba(self, Y) -> np.ndarray:
        if not hasattr(self, "network_"):
            raise NotFittedError("call fit before using this estimator")
        Y = check_binary_states(Y, self.k_)
        idx = Y @ (1 << np.arange(self.k_, dtype=np.int64)) if self.k_ else np.zeros(len(Y), int)
        return self.realized_[idx]

    def score(self, X, y=None) -> float:
        if not hasattr(self, "network_"):
            raise NotFittedError("call fit before using this estimator")
        K = check_kernel(X)
        return -max(tv_distance(K[i], self.realized_[i]) for i in range(K.shape[0]))
