"""FQW weight-file writer.

Layout: ASCII magic "FQW1", little-endian uint32 manifest length, UTF-8 JSON
manifest {version, activation, layers, metadata}, then per layer float64
little-endian row-major payloads -- (W) or (W1, W2) for residual blocks,
with the optional bias vector last.  Weight matrices are (out, in).
"""

import json
import struct

import numpy as np

MAGIC = b"FQW1"


def _f64(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(np.asarray(a), dtype="<f8").tobytes()


def write_fqw(path, layers, activation=None, metadata=None) -> None:
    """Write layers to ``path``.

    ``layers`` is a list of dicts: {"kind": "affine", "W": array, "b": array?}
    or {"kind": "residual", "W1": array, "W2": array, "b": array?}.
    """
    entries = []
    payloads = []
    for layer in layers:
        kind = layer["kind"]
        has_bias = layer.get("b") is not None
        if kind == "affine":
            W = np.asarray(layer["W"])
            entries.append(
                {"kind": "affine", "in": W.shape[1], "out": W.shape[0], "has_bias": has_bias}
            )
            payloads.append(_f64(W))
        elif kind == "residual":
            W1, W2 = np.asarray(layer["W1"]), np.asarray(layer["W2"])
            if W1.shape != W2.shape or W1.shape[0] != W1.shape[1]:
                raise ValueError("residual blocks need equal square matrices")
            entries.append(
                {"kind": "residual", "in": W1.shape[1], "out": W2.shape[0], "has_bias": has_bias}
            )
            payloads.append(_f64(W1))
            payloads.append(_f64(W2))
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
        if has_bias:
            payloads.append(_f64(layer["b"]))
    manifest = {
        "version": 1,
        "activation": activation or {"kind": "relu"},
        "layers": entries,
    }
    if metadata:
        manifest["metadata"] = metadata
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for chunk in payloads:
            f.write(chunk)
