"""Stand-in dataset for offline environments, in the MNIST IDX layout.

Upsamples scikit-learn's bundled 8x8 handwritten digits to 28x28 and writes
train/test IDX pairs.  This is NOT MNIST: accuracies measured on it are
surrogate numbers and must not be quoted as MNIST results.  Point the
trainer at real MNIST IDX files whenever they are available.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import idx


def build(out_dir, test_size: int = 300, seed: int = 0) -> dict:
    from scipy.ndimage import zoom
    from sklearn.datasets import load_digits
    from sklearn.model_selection import train_test_split

    digits = load_digits()
    images = digits.images / 16.0  # 8x8 in [0, 1]
    upsampled = np.stack([zoom(img, 3.5, order=1) for img in images])
    as_u8 = np.clip(np.round(upsampled * 255.0), 0, 255).astype(np.uint8)
    train_x, test_x, train_y, test_y = train_test_split(
        as_u8, digits.target, test_size=test_size, random_state=seed,
        stratify=digits.target,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    idx.write_images(out / "train-images-idx3-ubyte", train_x)
    idx.write_labels(out / "train-labels-idx1-ubyte", train_y)
    idx.write_images(out / "t10k-images-idx3-ubyte", test_x)
    idx.write_labels(out / "t10k-labels-idx1-ubyte", test_y)
    return {"train": len(train_y), "test": len(test_y), "dir": str(out)}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Write the surrogate digits dataset as MNIST-layout IDX files."
    )
    parser.add_argument("--out", required=True)
    parser.add_argument("--test-size", type=int, default=300)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    info = build(args.out, args.test_size, args.seed)
    print(f"wrote {info['train']} training and {info['test']} test samples to {info['dir']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
