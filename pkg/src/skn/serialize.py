"""JSON file formats for kernels and network parameters.

Numbers are written with Python's shortest-roundtrip decimal form, so a
save/load cycle reproduces every float64 bit-exactly. Files are
validated on load: kernel rows must be distributions and parameter
dimensions must be consistent.
"""

from __future__ import annotations

import json

import numpy as np

from .core import BlockMeta, LayerParams, NetworkParams, check_kernel, kernel_shape


def save_kernel(path, table) -> None:
    K = check_kernel(table)
    k, n = kernel_shape(K)
    payload = {"k": k, "n": n, "rows": [list(map(float, row)) for row in K]}
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_kernel(path) -> np.ndarray:
    with open(path) as fh:
        payload = json.load(fh)
    try:
        rows = np.asarray(payload["rows"], dtype=float)
        k, n = int(payload["k"]), int(payload["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed kernel file {path}: {exc}") from exc
    if rows.shape != (2 ** k, 2 ** n):
        raise ValueError(
            f"kernel file {path} declares shape (k={k}, n={n}) but has rows {rows.shape}")
    return check_kernel(rows)


def _layer_payload(layer: LayerParams) -> dict:
    return {"weights": [list(map(float, row)) for row in layer.weights],
            "bias": list(map(float, layer.bias))}


def save_params(path, net: NetworkParams) -> None:
    payload = {
        "k": net.k, "m": net.m, "n": net.n,
        "hidden": _layer_payload(net.hidden),
        "output": _layer_payload(net.output),
    }
    if net.block_meta is not None:
        payload["block_meta"] = {
            "block_size": net.block_meta.block_size,
            "number_of_blocks": net.block_meta.number_of_blocks,
            "assignment": "paired-inputs",
        }
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_params(path) -> NetworkParams:
    with open(path) as fh:
        payload = json.load(fh)
    try:
        k, m, n = int(payload["k"]), int(payload["m"]), int(payload["n"])
        hidden = LayerParams(np.asarray(payload["hidden"]["weights"], dtype=float).reshape(m, k),
                             np.asarray(payload["hidden"]["bias"], dtype=float))
        output = LayerParams(np.asarray(payload["output"]["weights"], dtype=float).reshape(n, m),
                             np.asarray(payload["output"]["bias"], dtype=float))
        meta = None
        if "block_meta" in payload and payload["block_meta"] is not None:
            meta = BlockMeta(int(payload["block_meta"]["block_size"]),
                             int(payload["block_meta"]["number_of_blocks"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed parameter file {path}: {exc}") from exc
    return NetworkParams(k, m, n, hidden, output, meta)
