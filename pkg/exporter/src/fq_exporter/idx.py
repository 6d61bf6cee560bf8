"""Minimal IDX (MNIST container) reader/writer."""

import gzip
import struct
from pathlib import Path

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


def _read_bytes(path):
    data = Path(path).read_bytes()
    return gzip.decompress(data) if data[:2] == b"\x1f\x8b" else data


def read_images(path) -> np.ndarray:
    data = _read_bytes(path)
    magic, count, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != IMAGES_MAGIC:
        raise ValueError(f"{path}: not an IDX image file (magic 0x{magic:08x})")
    body = data[16 : 16 + count * rows * cols]
    if len(body) < count * rows * cols:
        raise ValueError(f"{path}: truncated image payload")
    return np.frombuffer(body, dtype=np.uint8).reshape(count, rows * cols)


def read_labels(path) -> np.ndarray:
    data = _read_bytes(path)
    magic, count = struct.unpack(">II", data[:8])
    if magic != LABELS_MAGIC:
        raise ValueError(f"{path}: not an IDX label file (magic 0x{magic:08x})")
    body = data[8 : 8 + count]
    if len(body) < count:
        raise ValueError(f"{path}: truncated label payload")
    return np.frombuffer(body, dtype=np.uint8).astype(np.int64)


def write_images(path, images_u8: np.ndarray) -> None:
    arr = np.asarray(images_u8, dtype=np.uint8)
    count, rows, cols = arr.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGES_MAGIC, count, rows, cols))
        f.write(arr.tobytes())


def write_labels(path, labels) -> None:
    arr = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", LABELS_MAGIC, arr.shape[0]))
        f.write(arr.tobytes())


def load_split(directory, split: str):
    """(images in [0,1] as float32 (n, 784), labels) for 'train' or 'test'."""
    directory = Path(directory)
    stems = ("train",) if split == "train" else ("t10k", "test")
    for stem in stems:
        for suffix in ("", ".gz"):
            img = directory / f"{stem}-images-idx3-ubyte{suffix}"
            lab = directory / f"{stem}-labels-idx1-ubyte{suffix}"
            if img.exists() and lab.exists():
                images = read_images(img).astype(np.float32) / 255.0
                labels = read_labels(lab)
                if images.shape[0] != labels.shape[0]:
                    raise ValueError(f"{directory}: image/label counts differ")
                return images, labels
    raise FileNotFoundError(f"no {split} IDX pair in {directory}")
