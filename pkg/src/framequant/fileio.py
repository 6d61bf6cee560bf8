"""Binary file formats: FQW float models, FQQ quantized models, FQF frames, IDX datasets.

Every format opens with a 4-byte ASCII magic, a little-endian uint32 manifest
length, and a UTF-8 JSON manifest, followed by raw little-endian binary
payloads in manifest order.  Matrices are float64, row-major.  FQQ code
sections are bit-packed per :mod:`framequant.quantizer` (little-endian bit
order, one zero-padded section per matrix).  Writing is deterministic:
re-saving a loaded file reproduces it byte for byte.
"""

from __future__ import annotations

import gzip
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FileFormatError
from .frames import EXPLICIT, HARMONIC, Frame, Permutation, harmonic_frame
from .network import (
    ActivationSpec,
    AffineLayer,
    Model,
    QuantizedAffine,
    QuantizedModel,
    QuantizedResidualBlock,
    ResidualBlock,
)
from .quantizer import QuantizedMatrix, pack_codes, packed_size, unpack_codes

FQW_MAGIC = b"FQW1"
FQQ_MAGIC = b"FQQ1"
FQF_MAGIC = b"FQF1"
FORMAT_VERSION = 1

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


def _dump_manifest(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _write_container(path, magic: bytes, manifest: dict, payloads) -> None:
    blob = _dump_manifest(manifest)
    with open(path, "wb") as f:
        f.write(magic)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for chunk in payloads:
            f.write(chunk)


def _read_container(path, magic: bytes):
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:4] != magic:
        raise FileFormatError(
            f"{path}: bad magic {data[:4]!r}, expected {magic.decode()} file"
        )
    (mlen,) = struct.unpack("<I", data[4:8])
    if len(data) < 8 + mlen:
        raise FileFormatError(f"{path}: truncated manifest ({len(data) - 8} of {mlen} bytes)")
    try:
        manifest = json.loads(data[8 : 8 + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FileFormatError(f"{path}: unreadable manifest: {exc}") from exc
    return manifest, memoryview(data)[8 + mlen :]


class _PayloadReader:
    """Sequential reader over the binary section with length checking."""

    def __init__(self, buf: memoryview, path):
        self.buf = buf
        self.pos = 0
        self.path = path

    def matrix(self, rows: int, cols: int, what: str) -> np.ndarray:
        need = 8 * rows * cols
        if self.pos + need > len(self.buf):
            raise FileFormatError(
                f"{self.path}: truncated payload for {what} "
                f"(need {need} bytes, {len(self.buf) - self.pos} left)"
            )
        flat = np.frombuffer(self.buf[self.pos : self.pos + need], dtype="<f8")
        self.pos += need
        return flat.reshape(rows, cols).astype(np.float64, copy=True)

    def raw(self, nbytes: int, what: str) -> bytes:
        if self.pos + nbytes > len(self.buf):
            raise FileFormatError(
                f"{self.path}: truncated payload for {what} "
                f"(need {nbytes} bytes, {len(self.buf) - self.pos} left)"
            )
        out = bytes(self.buf[self.pos : self.pos + nbytes])
        self.pos += nbytes
        return out

    def done(self):
        if self.pos != len(self.buf):
            raise FileFormatError(
                f"{self.path}: {len(self.buf) - self.pos} unexpected trailing bytes"
            )


def _le_bytes(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


# ---------------------------------------------------------------------------
# FQW: float models


def _activation_manifest(act: ActivationSpec) -> dict:
    out = {"kind": act.kind}
    if act.kind == "leaky_relu":
        out["alpha"] = act.alpha
    return out


def _activation_from_manifest(obj) -> ActivationSpec:
    try:
        kind = obj["kind"]
    except (TypeError, KeyError) as exc:
        raise FileFormatError(f"manifest activation entry is malformed: {obj!r}") from exc
    if kind == "leaky_relu":
        return ActivationSpec(kind, float(obj.get("alpha", 0.01)))
    return ActivationSpec(kind)


def save_model(model: Model, path) -> None:
    """Write a float model as an FQW file."""
    layers = []
    payloads = []
    for layer in model.layers:
        if isinstance(layer, AffineLayer):
            layers.append(
                {
                    "kind": "affine",
                    "in": layer.in_dim,
                    "out": layer.out_dim,
                    "has_bias": layer.b is not None,
                }
            )
            payloads.append(_le_bytes(layer.W))
            if layer.b is not None:
                payloads.append(_le_bytes(layer.b))
        else:
            layers.append(
                {
                    "kind": "residual",
                    "in": layer.in_dim,
                    "out": layer.out_dim,
                    "has_bias": layer.b is not None,
                }
            )
            payloads.append(_le_bytes(layer.W1))
            payloads.append(_le_bytes(layer.W2))
            if layer.b is not None:
                payloads.append(_le_bytes(layer.b))
    manifest = {
        "version": FORMAT_VERSION,
        "activation": _activation_manifest(model.activation),
        "layers": layers,
    }
    _write_container(path, FQW_MAGIC, manifest, payloads)


def load_model(path) -> Model:
    """Read an FQW file back into a :class:`Model`."""
    manifest, buf = _read_container(path, FQW_MAGIC)
    reader = _PayloadReader(buf, path)
    layers = []
    for i, entry in enumerate(manifest.get("layers", [])):
        try:
            kind = entry["kind"]
            din, dout = int(entry["in"]), int(entry["out"])
            has_bias = bool(entry["has_bias"])
        except (TypeError, KeyError, ValueError) as exc:
            raise FileFormatError(f"{path}: layer {i} manifest entry malformed: {entry!r}") from exc
        if kind == "affine":
            W = reader.matrix(dout, din, f"layer {i} weights")
            b = reader.matrix(1, dout, f"layer {i} bias")[0] if has_bias else None
            layers.append(AffineLayer(W, b))
        elif kind == "residual":
            if din != dout:
                raise FileFormatError(f"{path}: layer {i}: residual blocks must be square")
            W1 = reader.matrix(dout, din, f"layer {i} inner weights")
            W2 = reader.matrix(dout, din, f"layer {i} outer weights")
            b = reader.matrix(1, dout, f"layer {i} bias")[0] if has_bias else None
            layers.append(ResidualBlock(W1, W2, b))
        else:
            raise FileFormatError(f"{path}: layer {i} has unknown kind {kind!r}")
    reader.done()
    try:
        return Model(tuple(layers), _activation_from_manifest(manifest.get("activation", {"kind": "relu"})))
    except ValueError as exc:
        raise FileFormatError(f"{path}: inconsistent shapes: {exc}") from exc


# ---------------------------------------------------------------------------
# FQF: standalone frames


def save_frame(frame: Frame, path) -> None:
    """Write a frame; harmonic frames store only their (d, N) metadata."""
    manifest = {"version": FORMAT_VERSION, "kind": frame.kind, "d": frame.d, "N": frame.N}
    payloads = [] if frame.kind == HARMONIC else [_le_bytes(frame.vectors)]
    _write_container(path, FQF_MAGIC, manifest, payloads)


def load_frame_vectors(path) -> tuple[np.ndarray, str]:
    """Raw (N, d) rows and kind tag from an FQF file, without validation."""
    manifest, buf = _read_container(path, FQF_MAGIC)
    try:
        kind, d, n = manifest["kind"], int(manifest["d"]), int(manifest["N"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(f"{path}: malformed frame manifest") from exc
    reader = _PayloadReader(buf, path)
    if kind == HARMONIC:
        reader.done()
        return harmonic_frame(d, n).vectors, kind
    vectors = reader.matrix(n, d, "frame vectors")
    reader.done()
    return vectors, kind


def load_frame(path) -> Frame:
    vectors, kind = load_frame_vectors(path)
    if kind == HARMONIC:
        return harmonic_frame(vectors.shape[1], vectors.shape[0])
    return Frame(d=vectors.shape[1], N=vectors.shape[0], vectors=vectors, kind=EXPLICIT)


# ---------------------------------------------------------------------------
# FQQ: quantized models


def _frame_manifest(frame: Frame) -> dict:
    return {"kind": frame.kind, "d": frame.d, "N": frame.N}


def _perm_manifest(perm: Permutation):
    return "identity" if perm.is_identity else [int(i) for i in perm.order]


def _qmatrix_entries(qmodel: QuantizedModel):
    """Flatten to (kind, QuantizedMatrix) pairs; residual blocks contribute
    their inner then outer matrix as consecutive entries."""
    for layer in qmodel.layers:
        if isinstance(layer, QuantizedAffine):
            yield "affine", layer.qmatrix, layer.bias
        else:
            yield "residual1", layer.q1, layer.bias
            yield "residual2", layer.q2, None


def save_quantized(qmodel: QuantizedModel, path) -> None:
    """Write a quantized model as an FQQ file."""
    entries = []
    payloads = []
    for kind, qm, bias in _qmatrix_entries(qmodel):
        entry = {
            "kind": kind,
            "rows": qm.rows,
            "cols": qm.cols,
            "mode": qm.mode,
            "K": qm.K,
            "delta": qm.delta,
            "frame": _frame_manifest(qm.frame),
            "permutation": _perm_manifest(qm.permutation),
            "bias_folded": qm.bias_folded,
        }
        if bias is not None:
            entry["float_bias"] = True
            payloads.append(_le_bytes(bias))
        if qm.frame.kind == EXPLICIT:
            payloads.append(_le_bytes(qm.frame.vectors))
        payloads.append(pack_codes(qm))
        entries.append(entry)
    manifest = {
        "version": FORMAT_VERSION,
        "activation": _activation_manifest(qmodel.activation),
        "layers": entries,
    }
    _write_container(path, FQQ_MAGIC, manifest, payloads)


def _load_qmatrix(entry: dict, reader: _PayloadReader, path, i: int):
    try:
        rows, cols = int(entry["rows"]), int(entry["cols"])
        mode = entry["mode"]
        K, delta = int(entry["K"]), float(entry["delta"])
        fr = entry["frame"]
        fkind, fd, fn = fr["kind"], int(fr["d"]), int(fr["N"])
        perm_spec = entry["permutation"]
        bias_folded = bool(entry["bias_folded"])
    except (TypeError, KeyError, ValueError) as exc:
        raise FileFormatError(f"{path}: layer {i} manifest entry malformed: {entry!r}") from exc
    float_bias = None
    if entry.get("float_bias"):
        float_bias = reader.matrix(1, rows, f"layer {i} bias")[0]
    if fkind == HARMONIC:
        frame = harmonic_frame(fd, fn)
    elif fkind == EXPLICIT:
        vectors = reader.matrix(fn, fd, f"layer {i} frame")
        try:
            frame = Frame(d=fd, N=fn, vectors=vectors, kind=EXPLICIT)
        except ValueError as exc:
            raise FileFormatError(f"{path}: layer {i} frame invalid: {exc}") from exc
    else:
        raise FileFormatError(f"{path}: layer {i} has unknown frame kind {fkind!r}")
    if perm_spec == "identity":
        perm = Permutation.identity(fn)
    else:
        try:
            perm = Permutation(np.asarray(perm_spec, dtype=np.int64))
        except ValueError as exc:
            raise FileFormatError(f"{path}: layer {i} permutation invalid: {exc}") from exc
    n_vectors = cols if mode == "column" else rows
    raw = reader.raw(packed_size(n_vectors, fn, K), f"layer {i} codes")
    try:
        codes = unpack_codes(raw, n_vectors, fn, K)
        qm = QuantizedMatrix(
            codes=codes, K=K, delta=delta, frame=frame, permutation=perm,
            mode=mode, rows=rows, cols=cols, bias_folded=bias_folded,
        )
    except ValueError as exc:
        raise FileFormatError(f"{path}: layer {i}: {exc}") from exc
    return qm, float_bias


def load_quantized(path) -> QuantizedModel:
    """Read an FQQ file back into a :class:`QuantizedModel`."""
    manifest, buf = _read_container(path, FQQ_MAGIC)
    reader = _PayloadReader(buf, path)
    layers = []
    pending_block = None  # (q1, bias) awaiting its residual2 partner
    for i, entry in enumerate(manifest.get("layers", [])):
        kind = entry.get("kind")
        qm, float_bias = _load_qmatrix(entry, reader, path, i)
        if pending_block is not None:
            if kind != "residual2":
                raise FileFormatError(f"{path}: layer {i}: expected residual2 after residual1")
            q1, bias = pending_block
            layers.append(QuantizedResidualBlock(q1, qm, bias))
            pending_block = None
        elif kind == "affine":
            layers.append(QuantizedAffine(qm, float_bias))
        elif kind == "residual1":
            pending_block = (qm, float_bias)
        elif kind == "residual2":
            raise FileFormatError(f"{path}: layer {i}: residual2 without residual1")
        else:
            raise FileFormatError(f"{path}: layer {i} has unknown kind {kind!r}")
    if pending_block is not None:
        raise FileFormatError(f"{path}: file ends with an unpaired residual1 entry")
    reader.done()
    return QuantizedModel(
        tuple(layers), _activation_from_manifest(manifest.get("activation", {"kind": "relu"}))
    )


# ---------------------------------------------------------------------------
# IDX datasets (MNIST container format)


@dataclass(frozen=True)
class DatasetHandle:
    """Flattened image rows in [0, 1] with integer labels."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.images.ndim != 2 or self.images.shape[1] != 784:
            raise FileFormatError(f"expected count x 784 images, got {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise FileFormatError(
                f"image count {self.images.shape[0]} does not match "
                f"label count {self.labels.shape[0]}"
            )
        if self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0):
            raise FileFormatError("pixel values must lie in [0, 1]")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() > 9):
            raise FileFormatError("labels must lie in 0..9")

    @property
    def count(self) -> int:
        return self.images.shape[0]


def _open_maybe_gz(path):
    data = Path(path).read_bytes()
    if data[:2] == b"\x1f\x8b":
        return gzip.decompress(data)
    return data


def read_idx_images(path) -> np.ndarray:
    """Images from an IDX3 file as (count, rows*cols) floats in [0, 1]."""
    data = _open_maybe_gz(path)
    if len(data) < 16:
        raise FileFormatError(f"{path}: too short for an image header")
    magic, count, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise FileFormatError(
            f"{path}: magic 0x{magic:08x} is not the image magic 0x{IDX_IMAGES_MAGIC:08x}"
        )
    need = count * rows * cols
    body = data[16:]
    if len(body) < need:
        raise FileFormatError(
            f"{path}: truncated image payload (expected {need} bytes, found {len(body)})"
        )
    pixels = np.frombuffer(body[:need], dtype=np.uint8).reshape(count, rows * cols)
    return pixels.astype(np.float64) / 255.0


def read_idx_labels(path) -> np.ndarray:
    """Labels from an IDX1 file as an int64 vector."""
    data = _open_maybe_gz(path)
    if len(data) < 8:
        raise FileFormatError(f"{path}: too short for a label header")
    magic, count = struct.unpack(">II", data[:8])
    if magic != IDX_LABELS_MAGIC:
        raise FileFormatError(
            f"{path}: magic 0x{magic:08x} is not the label magic 0x{IDX_LABELS_MAGIC:08x}"
        )
    body = data[8:]
    if len(body) < count:
        raise FileFormatError(
            f"{path}: truncated label payload (expected {count} bytes, found {len(body)})"
        )
    return np.frombuffer(body[:count], dtype=np.uint8).astype(np.int64)


_SPLIT_STEMS = {"test": ("t10k", "test"), "train": ("train",)}


def _find_idx_pair(directory: Path, split: str):
    stems = _SPLIT_STEMS[split]
    images = labels = None
    for stem in stems:
        for suffix in ("", ".gz"):
            img = directory / f"{stem}-images-idx3-ubyte{suffix}"
            lab = directory / f"{stem}-labels-idx1-ubyte{suffix}"
            if img.exists() and lab.exists():
                return img, lab
    raise FileNotFoundError(
        f"no {split} IDX pair ({stems[0]}-images-idx3-ubyte / {stems[0]}-labels-idx1-ubyte, "
        f"optionally .gz) in {directory}"
    )


def load_mnist(directory, split: str = "test") -> DatasetHandle:
    """Load an MNIST-layout dataset directory (raw or gzipped IDX files)."""
    if split not in _SPLIT_STEMS:
        raise ValueError(f"split must be 'test' or 'train', got {split!r}")
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"dataset directory {directory} does not exist")
    img_path, lab_path = _find_idx_pair(directory, split)
    images = read_idx_images(img_path)
    labels = read_idx_labels(lab_path)
    if images.shape[0] != labels.shape[0]:
        raise FileFormatError(
            f"{img_path} has {images.shape[0]} images but {lab_path} has "
            f"{labels.shape[0]} labels"
        )
    return DatasetHandle(images=images, labels=labels)


def write_idx_images(path, images_u8: np.ndarray) -> None:
    """Write (count, 28, 28) uint8 images as an IDX3 file."""
    arr = np.asarray(images_u8, dtype=np.uint8)
    count, rows, cols = arr.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, count, rows, cols))
        f.write(arr.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    """Write integer labels as an IDX1 file."""
    arr = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, arr.shape[0]))
        f.write(arr.tobytes())
