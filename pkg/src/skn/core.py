"""Shared types, binary-state indexing, and scalar operations.

Conventions used consistently across the package:

* A binary state of width ``w`` is a 0/1 vector; coordinate ``j``
  (0-based) carries integer weight ``2**j``, so the first coordinate is
  the least significant bit and states map to ``0 .. 2**w - 1``.
* A distribution over width-``n`` states is a dense float64 vector of
  length ``2**n``, indexed by that integer encoding.
* A kernel is a row-stochastic ``(2**k, 2**n)`` table whose row ``i``
  is the output distribution for the input with index ``i``.

Parameter containers are immutable after construction (their arrays are
marked read-only), so values can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Default floor used when pushing a target distribution into the
#: strict interior of the simplex.
DEFAULT_ETA = 1e-3

#: Tolerance for "sums to one" validation of distributions.
SUM_TOL = 1e-12

_TINY = 1e-300


# ---------------------------------------------------------------------------
# Scalar nonlinearities
# ---------------------------------------------------------------------------

def sigmoid(a):
    """Logistic function 1 / (1 + exp(-a)), stable for |a| up to ~700.

    Uses the sign-split form so that exp is only ever evaluated on
    non-positive arguments; saturates cleanly at the representable
    extremes instead of overflowing.
    """
    a = np.asarray(a, dtype=float)
    e = np.exp(-np.abs(a))
    out = np.where(a >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(out) if out.ndim == 0 else out


def logit(p, floor: float = 0.0):
    """Inverse of :func:`sigmoid` on (0, 1).

    ``floor`` narrows the accepted domain to ``[floor, 1 - floor]``;
    values outside it (or on the boundary of (0, 1)) raise ``ValueError``.
    """
    p = np.asarray(p, dtype=float)
    lo, hi = floor, 1.0 - floor
    if np.any(p < lo) or np.any(p > hi) or np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError(
            f"logit argument outside [{lo}, {hi}] (floor eta={floor}); "
            "clamp the target before inverting"
        )
    out = np.log(p) - np.log1p(-p)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Binary states
# ---------------------------------------------------------------------------

def bin_of(index: int, width: int) -> np.ndarray:
    """Binary state of the given width whose integer encoding is ``index``."""
    if width < 0:
        raise ValueError("width must be non-negative")
    if not 0 <= index < 2 ** width:
        raise ValueError(f"index {index} out of range for width {width}")
    return (index >> np.arange(width)) & 1


def index_of(bits) -> int:
    """Integer encoding of a binary state (first coordinate = weight 1)."""
    bits = np.asarray(bits)
    if bits.ndim != 1:
        raise ValueError("expected a 1-D binary state")
    if bits.size and not np.all((bits == 0) | (bits == 1)):
        raise ValueError("state entries must be 0 or 1")
    if bits.size == 0:
        return 0
    return int(bits.astype(np.int64) @ (np.int64(1) << np.arange(bits.size)))


def all_states(width: int) -> np.ndarray:
    """All binary states of a width as rows, row ``i`` = ``bin_of(i, width)``."""
    if width < 0:
        raise ValueError("width must be non-negative")
    idx = np.arange(2 ** width)
    return ((idx[:, None] >> np.arange(width)[None, :]) & 1).astype(np.int64)


def highest_set(bits) -> int:
    """1-based position of the highest active coordinate; 0 for the zero state."""
    bits = np.asarray(bits)
    nz = np.flatnonzero(bits)
    return int(nz[-1]) + 1 if nz.size else 0


def orthant_index(values) -> int:
    """Index of the orthant containing a real vector.

    Applies the Heaviside step entrywise (positive -> 1, negative -> 0)
    and reads the result as an integer state. A zero entry has no
    well-defined side and raises ``ValueError``.
    """
    values = np.asarray(values, dtype=float)
    if np.any(values == 0.0):
        raise ValueError("degenerate sign: zero entry has no orthant")
    return index_of((values > 0).astype(np.int64))


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------

def check_dist_vec(dist, tol: float = SUM_TOL) -> np.ndarray:
    """Validate a probability vector and return it as a float64 array."""
    d = np.asarray(dist, dtype=float)
    if d.ndim != 1 or d.size < 1:
        raise ValueError("distribution must be a non-empty 1-D vector")
    if not np.all(np.isfinite(d)):
        raise ValueError("distribution entries must be finite")
    if np.any(d < 0.0):
        raise ValueError("distribution entries must be non-negative")
    if abs(float(d.sum()) - 1.0) > tol:
        raise ValueError(f"distribution mass {d.sum()!r} is not 1 within {tol}")
    return d


def is_interior(dist, eta: float) -> bool:
    """True when every entry of ``dist`` is at least ``eta``."""
    return bool(np.all(np.asarray(dist, dtype=float) >= eta))


def tv_distance(p, q) -> float:
    """Total variation distance, half the L1 distance between two vectors."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    return 0.5 * float(np.sum(np.abs(p - q)))


def kl_divergence(p, q) -> float:
    """KL divergence sum(p * log(p / q)), with 0 log 0 = 0.

    ``q`` entries are floored at a denormal-scale constant so rows that
    underflow to exact zero produce a large finite value rather than inf.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    terms = np.where(p > 0.0, p * (np.log(np.maximum(p, _TINY)) - np.log(np.maximum(q, _TINY))), 0.0)
    return float(np.sum(terms))


def clamp_to_interior(dist, eta: float) -> np.ndarray:
    """Push a distribution into the interior: every entry >= eta, sum 1.

    Entries below the floor are pinned at ``eta`` and the remaining mass
    is rescaled proportionally over the free entries; pinning repeats if
    the rescale pushes a previously free entry under the floor. Interior
    inputs are returned unchanged.
    """
    d = check_dist_vec(dist)
    if not 0.0 < eta < 1.0 / d.size:
        raise ValueError(f"eta must lie in (0, {1.0 / d.size}) for {d.size} outcomes")
    if np.all(d >= eta):
        return d
    x = d.copy()
    pinned = np.zeros(x.size, dtype=bool)
    while True:
        low = (x < eta) & ~pinned
        if not low.any():
            break
        pinned |= low
        x[pinned] = eta
        free = ~pinned
        x[free] *= (1.0 - eta * pinned.sum()) / x[free].sum()
    return x


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def _exact_log2(value: int, what: str) -> int:
    if value < 1 or value & (value - 1):
        raise ValueError(f"{what} must be a power of two, got {value}")
    return value.bit_length() - 1


def check_kernel(table, tol: float = SUM_TOL) -> np.ndarray:
    """Validate a row-stochastic kernel table and return it as float64.

    Requires a 2-D array with power-of-two dimensions whose rows each
    pass :func:`check_dist_vec`.
    """
    K = np.asarray(table, dtype=float)
    if K.ndim != 2:
        raise ValueError("kernel must be a 2-D table")
    _exact_log2(K.shape[0], "kernel row count")
    _exact_log2(K.shape[1], "kernel column count")
    for row in K:
        check_dist_vec(row, tol)
    return K


def kernel_shape(table) -> tuple[int, int]:
    """(input width k, output width n) of a kernel table."""
    K = np.asarray(table)
    return (_exact_log2(K.shape[0], "kernel row count"),
            _exact_log2(K.shape[1], "kernel column count"))


def check_binary_states(states, width: int) -> np.ndarray:
    """Validate a batch of binary states with the given width."""
    Y = np.asarray(states)
    if Y.ndim == 1:
        Y = Y[None, :]
    if Y.ndim != 2 or Y.shape[1] != width:
        raise ValueError(f"expected states of width {width}, got shape {Y.shape}")
    if Y.size and not np.all((Y == 0) | (Y == 1)):
        raise ValueError("state entries must be 0 or 1")
    return Y.astype(np.int64)


# ---------------------------------------------------------------------------
# Parameter containers
# ---------------------------------------------------------------------------

def _freeze(value, dtype=float) -> np.ndarray:
    arr = np.array(value, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class LayerParams:
    """Affine parameters of one stochastic layer: an out-by-in weight
    table and a per-unit bias."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = _freeze(self.weights)
        b = _freeze(self.bias)
        if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
            raise ValueError(f"inconsistent layer shapes {w.shape} / {b.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("layer parameters must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def out_width(self) -> int:
        return self.weights.shape[0]

    @property
    def in_width(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class BlockMeta:
    """Structure tag for hidden layers built from per-input-pair blocks.

    Hidden units are grouped into ``number_of_blocks`` contiguous blocks
    of ``block_size`` units; the input with index ``i`` drives block
    ``i // 2`` and leaves every other block (almost surely) all-zero.
    """

    block_size: int
    number_of_blocks: int

    def __post_init__(self):
        if self.block_size < 1 or self.number_of_blocks < 1:
            raise ValueError("block_size and number_of_blocks must be >= 1")

    def active_block(self, input_index: int) -> int:
        return input_index // 2


@dataclass(frozen=True)
class NetworkParams:
    """Two stochastic layers with shape (k inputs, m hidden, n outputs)."""

    k: int
    m: int
    n: int
    hidden: LayerParams
    output: LayerParams
    block_meta: BlockMeta | None = None

    def __post_init__(self):
        if self.k < 0 or self.m < 1 or self.n < 1:
            raise ValueError(f"invalid shape (k={self.k}, m={self.m}, n={self.n})")
        if self.hidden.weights.shape != (self.m, self.k):
            raise ValueError(f"hidden layer shape {self.hidden.weights.shape} != ({self.m}, {self.k})")
        if self.output.weights.shape != (self.n, self.m):
            raise ValueError(f"output layer shape {self.output.weights.shape} != ({self.n}, {self.m})")
        meta = self.block_meta
        if meta is not None:
            expected_blocks = 2 ** (self.k - 1) if self.k >= 1 else 1
            if meta.block_size * meta.number_of_blocks != self.m:
                raise ValueError("block metadata does not tile the hidden layer")
            if meta.number_of_blocks != expected_blocks:
                raise ValueError(
                    f"expected {expected_blocks} blocks for k={self.k}, got {meta.number_of_blocks}"
                )

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.k, self.m, self.n)
