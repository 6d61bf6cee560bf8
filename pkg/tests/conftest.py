import numpy as np
import pytest

import framequant as fq


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_fnn(rng, widths, scale=1.0, activation=None):
    """Random affine stack with the given widths (in, hidden..., out)."""
    layers = []
    for din, dout in zip(widths, widths[1:]):
        layers.append(fq.AffineLayer(scale * rng.normal(size=(dout, din)) / np.sqrt(din)))
    return fq.Model(tuple(layers), activation or fq.ActivationSpec("relu"))


def random_residual(rng, k, n_blocks, scale=1.0):
    layers = [
        fq.ResidualBlock(
            scale * rng.normal(size=(k, k)) / np.sqrt(k),
            scale * rng.normal(size=(k, k)) / np.sqrt(k),
        )
        for _ in range(n_blocks)
    ]
    return fq.Model(tuple(layers))


def write_dataset(directory, images_u8, labels, split="test"):
    """Drop an IDX image/label pair into ``directory``."""
    stem = "t10k" if split == "test" else "train"
    directory.mkdir(parents=True, exist_ok=True)
    fq.write_idx_images(directory / f"{stem}-images-idx3-ubyte", images_u8)
    fq.write_idx_labels(directory / f"{stem}-labels-idx1-ubyte", labels)


@pytest.fixture
def planted_dataset(tmp_path, rng):
    """A small dataset whose labels a planted linear model gets exactly right."""
    W = rng.normal(size=(10, 784))
    model = fq.Model((fq.AffineLayer(W / np.linalg.norm(W, 2)),))
    images = rng.integers(0, 256, size=(64, 28, 28)).astype(np.uint8)
    x = images.reshape(64, 784) / 255.0
    labels = np.argmax(fq.forward(model, x), axis=1)
    data_dir = tmp_path / "data"
    write_dataset(data_dir, images, labels)
    return model, data_dir
