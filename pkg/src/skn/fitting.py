"""Exact-gradient fitting of network parameters to a target kernel.

The objective is the mean cross-entropy of the realized kernel under
the target, computed from the exhaustively marginalized rows, so its
gradient is exact (no sampling). Optimization is plain gradient descent
with backtracking halving and accept-if-better stepping; runs are
deterministic given (seed, restart index).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LayerParams, NetworkParams, check_kernel, kernel_shape, sigmoid
from .evaluate import ENUMERATION_CAP, _check_cap, _masses, _output_rows, _state_chunks, layer_row
from .harness import CounterRng


@dataclass(frozen=True)
class FitConfig:
    """Gradient-descent settings.

    ``step_size`` is the initial step; failed steps halve it and
    successful steps let it re-grow toward the initial value. Weights
    initialize uniformly in ``[-init_scale, init_scale]``.
    """

    step_size: float = 1.0
    iterations: int = 500
    restarts: int = 3
    init_scale: float = 0.5
    seed: int = 0
    min_step: float = 1e-12

    def __post_init__(self):
        if self.step_size <= 0 or self.iterations < 1 or self.restarts < 1:
            raise ValueError("step size, iterations, and restarts must be positive")


@dataclass
class NetworkGradient:
    """Partial derivatives with the same shapes as the parameters."""

    hidden_weights: np.ndarray
    hidden_bias: np.ndarray
    output_weights: np.ndarray
    output_bias: np.ndarray

    def norm(self) -> float:
        return float(np.sqrt(
            np.sum(self.hidden_weights ** 2) + np.sum(self.hidden_bias ** 2)
            + np.sum(self.output_weights ** 2) + np.sum(self.output_bias ** 2)))


def _realized(net: NetworkParams) -> np.ndarray:
    from .evaluate import full_kernel

    return full_kernel(net, "naive")


def objective(net: NetworkParams, target) -> float:
    """Mean cross-entropy of the realized rows under the target rows.

    Bounded below by the target's mean conditional entropy, with
    equality exactly when the realized rows match the target wherever
    the target has mass. Infinite if a realized entry underflows to
    zero where the target is positive (avoid by fitting at moderate
    sharpness).
    """
    K = check_kernel(target)
    if kernel_shape(K) != (net.k, net.n):
        raise ValueError("target shape does not match network")
    _check_cap(net.m, ENUMERATION_CAP)
    R = _realized(net)
    with np.errstate(divide="ignore"):
        logs = np.where(K > 0.0, np.log(R, out=np.full_like(R, -np.inf), where=R > 0.0), 0.0)
    terms = np.where(K > 0.0, K * logs, 0.0)
    return -float(terms.sum()) / K.shape[0]


def conditional_entropy(target) -> float:
    """Mean row entropy of a kernel; the floor of :func:`objective`."""
    K = check_kernel(target)
    terms = np.where(K > 0.0, K * np.log(np.where(K > 0.0, K, 1.0)), 0.0)
    return -float(terms.sum()) / K.shape[0]


def gradient(net: NetworkParams, target) -> NetworkGradient:
    """Exact gradient of :func:`objective` in every weight and bias.

    Derivatives are accumulated from the enumerated joint over (input,
    hidden state, output state); for the hidden layer they reduce to
    covariance-style terms between unit activity and the target-weighted
    output response.
    """
    K = check_kernel(target)
    if kernel_shape(K) != (net.k, net.n):
        raise ValueError("target shape does not match network")
    _check_cap(net.m, ENUMERATION_CAP)
    R = _realized(net)
    if np.any((K > 0.0) & (R <= 0.0)):
        raise FloatingPointError("realized kernel underflowed to zero where the target has mass")

    k, m, n = net.k, net.m, net.n
    x_bits = ((np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1).astype(float)
    gV = np.zeros((m, k))
    gc = np.zeros(m)
    gW = np.zeros((n, m))
    gb = np.zeros(n)

    for y_idx in range(2 ** k):
        y = ((y_idx >> np.arange(k)) & 1).astype(float)
        on = layer_row(net.hidden, y.astype(int))
        G = np.where(K[y_idx] > 0.0, K[y_idx] / R[y_idx], 0.0)
        w_bits = np.zeros(m)
        w_sum = 0.0
        gW_y = np.zeros((n, m))
        gb_y = np.zeros(n)
        for bits in _state_chunks(m):
            mass = _masses(on, bits)
            rows = _output_rows(net.output, bits)
            probs = sigmoid(bits @ net.output.weights.T + net.output.bias)
            g_z = rows @ G
            weighted = mass * g_z
            w_sum += weighted.sum()
            w_bits += weighted @ bits
            # A[z, i] = sum_x G(x) R(x|z) x_i
            A = rows @ (G[:, None] * x_bits)
            resp = A - probs * g_z[:, None]
            gb_y += mass @ resp
            gW_y += (mass[:, None] * resp).T @ bits
        gc_y = w_bits - on * w_sum
        gc += gc_y
        gV += np.outer(gc_y, y)
        gW += gW_y
        gb += gb_y

    scale = -1.0 / 2 ** k
    return NetworkGradient(scale * gV, scale * gc, scale * gW, scale * gb)


def _with_params(net: NetworkParams, V, c, W, b) -> NetworkParams:
    return NetworkParams(net.k, net.m, net.n,
                         LayerParams(V, c), LayerParams(W, b), net.block_meta)


def _descend(net: NetworkParams, target, cfg: FitConfig) -> tuple[NetworkParams, list[float]]:
    """Accept-if-better gradient descent from the given parameters."""
    V = net.hidden.weights.copy()
    c = net.hidden.bias.copy()
    W = net.output.weights.copy()
    b = net.output.bias.copy()
    current = _with_params(net, V, c, W, b)
    f = objective(current, target)
    trace = [f]
    step = cfg.step_size
    for _ in range(cfg.iterations):
        g = gradient(current, target)
        improved = False
        while step >= cfg.min_step:
            candidate = _with_params(net, V - step * g.hidden_weights,
                                     c - step * g.hidden_bias,
                                     W - step * g.output_weights,
                                     b - step * g.output_bias)
            f_new = objective(candidate, target)
            if f_new < f:
                improved = True
                break
            step *= 0.5
        if not improved:
            trace.append(f)
            break
        V = candidate.hidden.weights.copy()
        c = candidate.hidden.bias.copy()
        W = candidate.output.weights.copy()
        b = candidate.output.bias.copy()
        current, f = candidate, f_new
        trace.append(f)
        step = min(step * 2.0, cfg.step_size)
    return current, trace


def _random_network(k: int, m: int, n: int, scale: float, rng: CounterRng) -> NetworkParams:
    def draw(count):
        return scale * (2.0 * rng.uniforms(count) - 1.0)

    return NetworkParams(k, m, n,
                         LayerParams(draw(m * k).reshape(m, k), draw(m)),
                         LayerParams(draw(n * m).reshape(n, m), draw(n)))


def fit(target, m: int, cfg: FitConfig = FitConfig()) -> tuple[NetworkParams, list[float]]:
    """Best-of-restarts gradient descent toward a target kernel.

    Restart ``r`` initializes from ``CounterRng(cfg.seed, stream=r)``;
    the restart with the lowest final objective wins. Returns the
    fitted network and its objective trace (non-increasing by
    construction).
    """
    K = check_kernel(target)
    k, n = kernel_shape(K)
    if m < 1:
        raise ValueError("need at least one hidden unit")
    _check_cap(m, ENUMERATION_CAP)
    best: tuple[NetworkParams, list[float]] | None = None
    for r in range(cfg.restarts):
        start = _random_network(k, m, n, cfg.init_scale, CounterRng(cfg.seed, stream=r))
        net, trace = _descend(start, K, cfg)
        if best is None or trace[-1] < best[1][-1]:
            best = (net, trace)
    return best


def refine(net: NetworkParams, target, cfg: FitConfig = FitConfig()) -> tuple[NetworkParams, list[float]]:
    """Gradient refinement from existing parameters.

    Accept-if-better stepping guarantees the final objective never
    exceeds the starting one.
    """
    return _descend(net, check_kernel(target), cfg)
