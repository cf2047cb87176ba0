"""Closed-form weight constructions for two-layer stochastic networks.

Everything here is built from four pieces:

* :func:`edge_unit` places a single stochastic unit so that it fires
  with two prescribed probabilities on the two endpoints of a cube edge
  and is silent elsewhere, up to a leak controlled by the sharpness
  ``alpha``.
* :func:`invert_chain` converts a target distribution over "index of
  the highest active unit" into per-unit stay-zero probabilities for a
  chain of independent units.
* :func:`orthant_weights` is an exact integer affine map that separates
  binary states by their highest active coordinate, one orthant per
  class; scaled by ``alpha`` it drives a deterministic output layer.
* :func:`solve_splitter` tunes one extra output unit that splits each
  class's mass between a pair of adjacent outcomes at prescribed odds.

:func:`compile_fixed_output` combines the first three into a network
whose output layer does not depend on the target; its hidden layer
needs ``2**(k-1) * (2**n - 1)`` units. :func:`compile_free_output`
additionally tunes the splitter row and halves the per-block width to
``2**(n-1) - 1`` at the cost of residuals wherever the splitter is
shared between inputs. :func:`compile_distribution` covers the
input-free case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    BlockMeta,
    DEFAULT_ETA,
    LayerParams,
    NetworkParams,
    bin_of,
    check_dist_vec,
    check_kernel,
    clamp_to_interior,
    kernel_shape,
    logit,
    sigmoid,
    tv_distance,
)

#: Target total leak used when the sharpness is chosen automatically.
DEFAULT_LEAK = 1e-9

DEFAULT_RATIO_TOL = 1e-13


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------

def orthant_weights(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer affine map sending states to orthants by highest active unit.

    Returns ``(W, b)`` with ``W`` of shape ``(n, 2**n - 1)`` and
    ``b = -(1, ..., 1)``. Column ``l`` (1-based) is ``2**l * (2*bits(l) - 1)``
    where ``bits(l)`` is the width-``n`` state with index ``l``. For every
    state ``z`` of width ``2**n - 1``, ``W z + b`` is a vector of odd
    integers lying in the orthant whose index equals the position of the
    highest active coordinate of ``z`` (0 for the zero state): the
    highest column dominates the signed sum of all lower ones.
    """
    if n < 1:
        raise ValueError("output width must be >= 1")
    N = 2 ** n - 1
    W = np.zeros((n, N), dtype=np.int64)
    for l in range(1, N + 1):
        W[:, l - 1] = (np.int64(2) ** l) * (2 * bin_of(l, n) - 1)
    b = -np.ones(n, dtype=np.int64)
    return W, b


def edge_unit(y_a, y_b, q_a: float, q_b: float, *, alpha: float,
              floor: float = 0.0) -> tuple[np.ndarray, float]:
    """Weights and bias of one unit supported on a cube edge.

    ``y_a`` and ``y_b`` must differ in exactly one coordinate. The unit
    fires with probability ``q_a`` on ``y_a``, ``q_b`` on ``y_b``, and
    its pre-activation on any other input is at most
    ``-2 * alpha + |s_a| + |s_b - s_a|`` where ``s = logit(q)``: each
    coordinate disagreeing with the edge contributes ``-2 * alpha``.

    ``floor`` is forwarded to :func:`~skn.core.logit`, so targets outside
    ``[floor, 1 - floor]`` are rejected.
    """
    y_a = np.asarray(y_a, dtype=float)
    y_b = np.asarray(y_b, dtype=float)
    if y_a.shape != y_b.shape:
        raise ValueError("edge endpoints must have equal width")
    diff = np.flatnonzero(y_a != y_b)
    if diff.size != 1:
        raise ValueError("edge endpoints must differ in exactly one coordinate")
    l = int(diff[0])
    if y_a[l] == 1:
        y_a, y_b, q_a, q_b = y_b, y_a, q_b, q_a
    s_a = logit(q_a, floor)
    s_b = logit(q_b, floor)
    # Supporting hyperplane of the edge: zero on both endpoints, and at
    # most -2 on every other vertex of the cube.
    v_tilde = 2.0 * (2.0 * y_a - 1.0)
    v_tilde[l] = 0.0
    c_tilde = -2.0 * float(np.sum(np.delete(y_a, l)))
    v = alpha * v_tilde
    v[l] += s_b - s_a
    return v, alpha * c_tilde + s_a


def first_layer(products, k: int, *, alpha: float,
                floor: float = 0.0) -> tuple[LayerParams, BlockMeta]:
    """Hidden layer realizing one product distribution per input.

    ``products`` maps each of the ``2**k`` inputs to the firing
    probabilities of its block's units (all blocks share a width ``N``).
    Inputs are paired by consecutive index; pair ``i`` drives block
    ``i``, whose unit ``j`` is an :func:`edge_unit` targeting the
    ``j``-th probability of the two paired inputs. On inputs outside
    its pair a unit stays silent up to the edge-unit leak.
    """
    if k < 1:
        raise ValueError("paired blocks need at least one input unit")
    products = [np.asarray(p, dtype=float) for p in products]
    if len(products) != 2 ** k:
        raise ValueError(f"expected {2 ** k} product rows, got {len(products)}")
    N = products[0].size
    if any(p.size != N for p in products):
        raise ValueError("all product rows must share one width")
    blocks = 2 ** (k - 1)
    m = blocks * N
    V = np.zeros((m, k))
    c = np.zeros(m)
    for i in range(blocks):
        y_a, y_b = bin_of(2 * i, k), bin_of(2 * i + 1, k)
        for j in range(N):
            v, cc = edge_unit(y_a, y_b, products[2 * i][j], products[2 * i + 1][j],
                              alpha=alpha, floor=floor)
            V[N * i + j] = v
            c[N * i + j] = cc
    return LayerParams(V, c), BlockMeta(N, blocks)


def fixed_output_layer(k: int, n: int, *, alpha: float) -> LayerParams:
    """Target-independent output layer: block-repeated orthant map.

    The weight table is ``alpha * [W | W | ... | W]`` with one copy of
    :func:`orthant_weights` per hidden block and bias ``-alpha``. On an
    active block state ``z`` (all other blocks zero) each output unit
    errs from the indicator of the highest active coordinate by at most
    ``sigmoid(-alpha)``.
    """
    W, b = orthant_weights(n)
    blocks = 2 ** (k - 1) if k >= 1 else 1
    return LayerParams(alpha * np.tile(W, (1, blocks)).astype(float),
                       alpha * b.astype(float))


# ---------------------------------------------------------------------------
# Chain inversion
# ---------------------------------------------------------------------------

def invert_chain(q) -> np.ndarray:
    """Stay-zero probabilities of a chain of units hitting a target.

    For independent units ``1..N`` where ``p[i]`` is the probability
    that unit ``i+1`` stays zero, the index of the highest active unit
    is distributed as ``q[0] = prod(p)`` and
    ``q[i] = (1 - p[i-1]) * prod(p[i:])``. This inverts that map: given
    a strictly positive ``q`` over ``N + 1`` outcomes it returns ``p``
    with ``p[i] = 1 / (1 + (q[i+1]/q[0]) * prod(p[:i]))``, solved
    sequentially.

    Note the returned values are stay-zero probabilities; the firing
    probabilities fed to a hidden layer are their complements.
    """
    q = check_dist_vec(q)
    if q.size < 2:
        raise ValueError("need at least two outcomes")
    if np.any(q <= 0.0):
        raise ValueError("chain inversion needs a strictly positive target; clamp first")
    ratios = q[1:] / q[0]
    p = np.empty(q.size - 1)
    prefix = 1.0
    for i in range(p.size):
        p[i] = 1.0 / (1.0 + ratios[i] * prefix)
        prefix *= p[i]
    return p


def chain_forward(p) -> np.ndarray:
    """Distribution of the highest active unit for given stay-zero
    probabilities (the forward map inverted by :func:`invert_chain`)."""
    p = np.asarray(p, dtype=float)
    N = p.size
    suffix = np.ones(N + 1)
    for j in range(N - 1, -1, -1):
        suffix[j] = suffix[j + 1] * p[j]
    q = np.empty(N + 1)
    q[0] = suffix[0]
    for i in range(1, N + 1):
        q[i] = (1.0 - p[i - 1]) * suffix[i]
    return q


# ---------------------------------------------------------------------------
# Splitter row (free output layer)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitterParams:
    """Parameters of the output unit that splits each highest-active-unit
    class between a pair of adjacent outcomes: a shared bias plus one
    weight per hidden unit of the block."""

    bias: float
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))


def even_share(splitter: SplitterParams, state) -> float:
    """Share of a hidden state's output mass sent to the even outcome.

    Equals ``1 - sigmoid(bias + weights . state)``; strictly decreasing
    in every weight whose coordinate is active.
    """
    z = np.asarray(state, dtype=float)
    return 1.0 - sigmoid(splitter.bias + float(splitter.weights @ z))


def _pair_mass(splitter: SplitterParams, on_probs: np.ndarray, l: int) -> tuple[float, float]:
    """Weighted (even, odd) mass for the class of states whose highest
    active unit is ``l`` (1-based), weighting prefix states by their
    probability under ``on_probs``.

    Both sides are computed with their own sigmoid so that neither
    underflows to zero while the other saturates.
    """
    even = odd = 0.0
    t = on_probs[:l - 1]
    w_prefix = splitter.weights[:l - 1]
    for idx in range(2 ** (l - 1)):
        zp = bin_of(idx, l - 1)
        w = float(np.prod(np.where(zp == 1, t, 1.0 - t))) if l > 1 else 1.0
        a = splitter.bias + float(w_prefix @ zp) + splitter.weights[l - 1]
        even += w * sigmoid(-a)
        odd += w * sigmoid(a)
    return even, odd


def weighted_pair_ratios(splitter: SplitterParams, on_probs) -> np.ndarray:
    """Forward map of the splitter: per-class even/odd odds.

    Entry ``l`` is the ratio of weighted even-outcome mass to weighted
    odd-outcome mass over the states whose highest active unit is ``l``
    (entry 0 covers the all-zero state alone).
    """
    on_probs = np.asarray(on_probs, dtype=float)
    N = on_probs.size
    out = np.empty(N + 1)
    out[0] = sigmoid(-splitter.bias) / sigmoid(splitter.bias)
    for l in range(1, N + 1):
        even, odd = _pair_mass(splitter, on_probs, l)
        out[l] = even / odd
    return out


def solve_splitter(on_probs, ratios, *, bias: float | None = None,
                   ratio_tol: float = DEFAULT_RATIO_TOL,
                   max_iter: int = 200) -> SplitterParams:
    """Solve splitter parameters so the per-class odds match ``ratios``.

    ``ratios[0]`` fixes the bias in closed form (``-log(ratios[0])``)
    unless ``bias`` is supplied, in which case class 0 is left to
    whatever odds that bias implies. Each weight is then found by
    bisection on the log-odds residual of its class, which is strictly
    decreasing in the weight; weights are solved in class order and a
    solved weight never changes the odds of an earlier class. The
    bracket is grown by doubling until it straddles the target.
    """
    on_probs = np.asarray(on_probs, dtype=float)
    ratios = np.asarray(ratios, dtype=float)
    N = on_probs.size
    if ratios.size != N + 1:
        raise ValueError(f"expected {N + 1} odds targets, got {ratios.size}")
    if np.any(ratios <= 0.0) or not np.all(np.isfinite(ratios)):
        raise ValueError("odds targets must be finite and positive")
    if bias is None:
        bias = -math.log(ratios[0])
    weights = np.zeros(N)
    splitter = SplitterParams(bias, weights)

    for l in range(1, N + 1):
        target = math.log(ratios[l])

        def residual(x: float) -> float:
            weights[l - 1] = x
            even, odd = _pair_mass(splitter, on_probs, l)
            return math.log(even) - math.log(odd) - target

        span = 32.0
        while not (residual(-span) > 0.0 > residual(span)):
            span *= 2.0
            if span > 2.0 ** 40:
                raise RuntimeError(f"no bracket for class {l}; pathological odds target")
        lo, hi = -span, span
        solved = False
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            r = residual(mid)
            if abs(r) <= ratio_tol:
                solved = True
                break
            if r > 0.0:
                lo = mid
            else:
                hi = mid
        if not solved:
            raise RuntimeError(
                f"splitter bisection for class {l} did not reach |log-odds| <= "
                f"{ratio_tol} in {max_iter} iterations"
            )
        weights[l - 1] = mid
    return SplitterParams(bias, weights.copy())


# ---------------------------------------------------------------------------
# Size bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Bounds:
    """Hidden-unit counts: parameter-counting lower bounds and the
    constructive upper bounds, for fixed and free output layers."""

    lower_fixed: int
    lower_free: int
    upper_fixed: int
    upper_free: int | None


def hidden_unit_bounds(k: int, n: int) -> Bounds:
    """Integer-exact hidden-unit bounds for shape ``(k, n)``.

    ``upper_free`` requires ``n >= 2`` and is ``None`` for ``n = 1``.
    """
    if k < 1 or n < 1:
        raise ValueError("bounds require k >= 1 and n >= 1")
    cells = 2 ** k * (2 ** n - 1)
    lower_fixed = -(-cells // (k + 1))
    lower_free = -(-(cells - n) // (n + k + 1))
    upper_fixed = 2 ** (k - 1) * (2 ** n - 1)
    upper_free = 2 ** (k - 1) * (2 ** (n - 1) - 1) if n >= 2 else None
    return Bounds(lower_fixed, lower_free, upper_fixed, upper_free)


# ---------------------------------------------------------------------------
# Compilers
# ---------------------------------------------------------------------------

def _auto_alpha(max_abs_logit: float, m: int, n: int, leak: float) -> float:
    """Sharpness making the per-unit leak at most ``leak / (m * 2**n)``."""
    return max_abs_logit + math.log(m * 2 ** n / leak)


def _resolve_alpha(alpha: float | None, products, m: int, n: int) -> float:
    if alpha is not None:
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        return float(alpha)
    spread = max(float(np.max(np.abs(logit(p)))) for p in products)
    return _auto_alpha(spread, m, n, DEFAULT_LEAK)


def compile_fixed_output(target, *, alpha: float | None = None,
                         eta: float = DEFAULT_ETA) -> NetworkParams:
    """Compile a network with a target-independent output layer.

    Uses ``m = 2**(k-1) * (2**n - 1)`` hidden units. Each target row is
    clamped to the interior at ``eta``, chain-inverted into per-unit
    firing probabilities for the input's block, and realized by paired
    edge units; the output layer is the block-repeated, ``alpha``-scaled
    orthant map. The realized kernel converges to the clamped target as
    ``alpha`` grows. ``alpha=None`` picks a sharpness from the largest
    programmed logit and :data:`DEFAULT_LEAK`.
    """
    K = check_kernel(target)
    k, n = kernel_shape(K)
    if k < 1:
        raise ValueError("need k >= 1 inputs; use compile_distribution for k = 0")
    m = 2 ** (k - 1) * (2 ** n - 1)
    products = [1.0 - invert_chain(clamp_to_interior(row, eta)) for row in K]
    alpha = _resolve_alpha(alpha, products, m, n)
    hidden, meta = first_layer(products, k, alpha=alpha)
    output = fixed_output_layer(k, n, alpha=alpha)
    return NetworkParams(k, m, n, hidden, output, meta)


@dataclass(frozen=True)
class ResidualReport:
    """Gap between the idealized realized kernel of a free-output compile
    and its target, before any finite-sharpness leakage.

    Nonzero residuals are structural: the splitter weights of a block
    are shared by both inputs of its pair (fit to the even input), and
    the splitter bias is shared by all blocks (fit to input 0).
    """

    per_input_tv: np.ndarray
    idealized: np.ndarray

    @property
    def max_tv(self) -> float:
        return float(np.max(self.per_input_tv))


def _idealized_free_row(on_probs: np.ndarray, splitter: SplitterParams, n: int) -> np.ndarray:
    """Sharp-limit output row: block states keep their product mass and
    split it between the even/odd outcomes of their class."""
    N = on_probs.size
    row = np.zeros(2 ** n)
    for idx in range(2 ** N):
        z = bin_of(idx, N)
        mass = float(np.prod(np.where(z == 1, on_probs, 1.0 - on_probs)))
        l = int(np.flatnonzero(z)[-1]) + 1 if idx else 0
        lam = even_share(splitter, z)
        row[2 * l] += mass * lam
        row[2 * l + 1] += mass * (1.0 - lam)
    return row


def compile_free_output(target, *, alpha: float | None = None,
                        eta: float = DEFAULT_ETA,
                        ratio_tol: float = DEFAULT_RATIO_TOL,
                        ) -> tuple[NetworkParams, ResidualReport]:
    """Compile a network tuning both layers; needs ``n >= 2``.

    Uses ``m = 2**(k-1) * (2**(n-1) - 1)`` hidden units. Per input, the
    sums of adjacent outcome pairs are chain-inverted to program the
    block; output units ``2..n`` form the ``alpha``-scaled orthant map
    on ``n - 1`` bits, and output unit 1 is a splitter row assigning the
    within-pair odds. The splitter weights of block ``i`` are solved
    against the even input ``2i``; the splitter bias is solved against
    input 0 and shared by every block. The returned
    :class:`ResidualReport` measures, per input, the total variation
    between the idealized realized row and the target row; residuals
    are generally nonzero for odd inputs and for the first outcome pair
    of blocks beyond the first.
    """
    K = check_kernel(target)
    k, n = kernel_shape(K)
    if k < 1:
        raise ValueError("need k >= 1 inputs; use compile_distribution for k = 0")
    if n < 2:
        raise ValueError("the free-output construction needs n >= 2")
    blocks = 2 ** (k - 1)
    N = 2 ** (n - 1) - 1
    m = blocks * N

    clamped = np.array([clamp_to_interior(row, eta) for row in K])
    products = [1.0 - invert_chain(row[0::2] + row[1::2]) for row in clamped]
    alpha = _resolve_alpha(alpha, products, m, n)
    hidden, meta = first_layer(products, k, alpha=alpha)

    splitters: list[SplitterParams] = []
    split_row = np.zeros(m)
    bias: float | None = None
    for i in range(blocks):
        odds = clamped[2 * i][0::2] / clamped[2 * i][1::2]
        sp = solve_splitter(products[2 * i], odds, bias=bias, ratio_tol=ratio_tol)
        bias = sp.bias
        splitters.append(sp)
        split_row[N * i:N * (i + 1)] = sp.weights

    W_high, _ = orthant_weights(n - 1)
    W_out = np.vstack([split_row, alpha * np.tile(W_high, (1, blocks)).astype(float)])
    b_out = np.concatenate([[bias], -alpha * np.ones(n - 1)])
    net = NetworkParams(k, m, n, hidden, LayerParams(W_out, b_out), meta)

    idealized = np.vstack([
        _idealized_free_row(products[y], splitters[y // 2], n)
        for y in range(2 ** k)
    ])
    per_input = np.array([tv_distance(idealized[y], K[y]) for y in range(2 ** k)])
    return net, ResidualReport(per_input, idealized)


def compile_distribution(target, variant: str = "fixed", *,
                         alpha: float | None = None,
                         eta: float = DEFAULT_ETA,
                         ratio_tol: float = DEFAULT_RATIO_TOL) -> NetworkParams:
    """Compile an input-free network (k = 0) realizing one distribution.

    ``variant="fixed"`` uses ``2**n - 1`` hidden units whose biases are
    the chain-inverted firing logits, with the fixed orthant output
    layer. ``variant="trainable"`` uses ``2**(n-1) - 1`` hidden units
    (requires ``n >= 2``) and a solved splitter row; with a single
    target the splitter is fully determined, so the realized
    distribution converges to the clamped target in both variants.
    """
    q = check_dist_vec(target)
    n = (q.size).bit_length() - 1
    if 2 ** n != q.size:
        raise ValueError("distribution length must be a power of two")
    if n < 1:
        raise ValueError("need at least one output unit")
    qc = clamp_to_interior(q, eta)

    if variant == "fixed":
        on = 1.0 - invert_chain(qc)
        m = 2 ** n - 1
        alpha = _resolve_alpha(alpha, [on], m, n)
        hidden = LayerParams(np.zeros((m, 0)), logit(on))
        output = fixed_output_layer(0, n, alpha=alpha)
        return NetworkParams(0, m, n, hidden, output, BlockMeta(m, 1))

    if variant == "trainable":
        if n < 2:
            raise ValueError("the trainable variant needs n >= 2")
        on = 1.0 - invert_chain(qc[0::2] + qc[1::2])
        m = 2 ** (n - 1) - 1
        alpha = _resolve_alpha(alpha, [on], m, n)
        hidden = LayerParams(np.zeros((m, 0)), logit(on))
        sp = solve_splitter(on, qc[0::2] / qc[1::2], ratio_tol=ratio_tol)
        W_high, _ = orthant_weights(n - 1)
        W_out = np.vstack([sp.weights, alpha * W_high.astype(float)])
        b_out = np.concatenate([[sp.bias], -alpha * np.ones(n - 1)])
        return NetworkParams(0, m, n, hidden, LayerParams(W_out, b_out), BlockMeta(m, 1))

    raise ValueError(f"unknown variant {variant!r} (expected 'fixed' or 'trainable')")
