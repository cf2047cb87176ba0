"""Exact evaluation of layer and network kernels.

The composed kernel of a two-layer network is obtained by summing over
all hidden states. Two routes are provided:

* :func:`compose_row_naive` enumerates every hidden state and is the
  ground truth, including whatever probability leaks into nominally
  inactive units. It is capped at ``ENUMERATION_CAP`` hidden units.
* :func:`compose_row_blockwise` applies to block-structured networks
  and enumerates only the states of the block driven by the input,
  pinning all other blocks to zero. It computes the leakage-free
  idealization of the construction and serves as an independent cross
  check of the naive route.

Enumeration is vectorized over chunks of hidden states so memory stays
bounded near the cap; numpy reductions (pairwise summation) keep the
rounding error of the 2**m-term sums small.
"""

from __future__ import annotations

import numpy as np

from .core import (
    LayerParams,
    NetworkParams,
    check_binary_states,
    index_of,
    sigmoid,
)

#: Largest hidden-layer width the naive path will enumerate (2**22 states).
ENUMERATION_CAP = 22

_CHUNK_BITS = 14


class EnumerationCapError(ValueError):
    """Raised when a network is too wide for exhaustive enumeration."""


def layer_row(layer: LayerParams, state) -> np.ndarray:
    """Per-unit firing probabilities of a layer for one input state.

    Entry ``j`` is ``sigmoid(w_j . state + b_j)``.
    """
    y = check_binary_states(state, layer.in_width)[0]
    return sigmoid(layer.weights @ y.astype(float) + layer.bias)


def product_mass(on_probs, state) -> float:
    """Probability of one joint state under independent units.

    ``on_probs[j]`` is the probability that unit ``j`` is 1; the mass of
    ``state`` is the product of the matching per-unit factors.
    """
    p = np.asarray(on_probs, dtype=float)
    z = check_binary_states(state, p.size)[0]
    return float(np.prod(np.where(z == 1, p, 1.0 - p)))


def _state_chunks(width: int):
    """Yield float 0/1 matrices covering all states of a width in order."""
    total = 2 ** width
    step = min(total, 2 ** _CHUNK_BITS)
    cols = np.arange(width)[None, :]
    for start in range(0, total, step):
        idx = np.arange(start, min(start + step, total))
        yield ((idx[:, None] >> cols) & 1).astype(float)


def _output_rows(output: LayerParams, bits: np.ndarray) -> np.ndarray:
    """Output distribution for each hidden state in ``bits`` (rows)."""
    probs = sigmoid(bits @ output.weights.T + output.bias)
    rows = np.ones((bits.shape[0], 1))
    for i in range(output.out_width):
        p = probs[:, i:i + 1]
        rows = np.hstack([rows * (1.0 - p), rows * p])
    return rows


def _masses(on_probs: np.ndarray, bits: np.ndarray) -> np.ndarray:
    return np.prod(np.where(bits > 0.5, on_probs, 1.0 - on_probs), axis=1)


def _check_cap(m: int, cap: int):
    if m > cap:
        raise EnumerationCapError(
            f"naive enumeration of 2**{m} hidden states exceeds the cap of "
            f"2**{cap}; use the blockwise evaluator for block-structured networks"
        )


def compose_row_naive(net: NetworkParams, state, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Exact output distribution for one input, marginalizing all 2**m
    hidden states."""
    _check_cap(net.m, cap)
    on = layer_row(net.hidden, state)
    row = np.zeros(2 ** net.n)
    for bits in _state_chunks(net.m):
        row += _masses(on, bits) @ _output_rows(net.output, bits)
    return row


def compose_row_blockwise(net: NetworkParams, state) -> np.ndarray:
    """Leakage-free output distribution for one input of a block network.

    Enumerates the 2**N states of the block assigned to the input and
    treats every other hidden unit as exactly zero. For networks built
    by the compilers this matches the naive route up to the off-block
    leakage, which vanishes as the sharpness grows.
    """
    meta = net.block_meta
    if meta is None:
        raise ValueError("blockwise evaluation requires block metadata")
    y = check_binary_states(state, net.k)[0]
    block = meta.active_block(index_of(y))
    units = slice(meta.block_size * block, meta.block_size * (block + 1))
    on = sigmoid(net.hidden.weights[units] @ y.astype(float) + net.hidden.bias[units])
    sub_output = LayerParams(net.output.weights[:, units], net.output.bias)
    row = np.zeros(2 ** net.n)
    for bits in _state_chunks(meta.block_size):
        row += _masses(on, bits) @ _output_rows(sub_output, bits)
    return row


def full_kernel(net: NetworkParams, evaluator: str = "naive",
                cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Realized kernel of a network: one output row per input state.

    ``evaluator`` selects the naive (exact) or blockwise (idealized)
    route. The naive route shares the hidden-state enumeration across
    all inputs.
    """
    if evaluator == "blockwise":
        return np.vstack([
            compose_row_blockwise(net, (y >> np.arange(net.k)) & 1)
            for y in range(2 ** net.k)
        ])
    if evaluator != "naive":
        raise ValueError(f"unknown evaluator {evaluator!r}")
    _check_cap(net.m, cap)
    inputs = 2 ** net.k
    ons = [layer_row(net.hidden, (y >> np.arange(net.k)) & 1) for y in range(inputs)]
    K = np.zeros((inputs, 2 ** net.n))
    for bits in _state_chunks(net.m):
        rows = _output_rows(net.output, bits)
        for y in range(inputs):
            K[y] += _masses(ons[y], bits) @ rows
    return K
