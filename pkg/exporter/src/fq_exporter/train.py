"""Train a fixture network on an IDX dataset directory and export FQW weights.

Runs are deterministic for a fixed seed on one platform (single-threaded
torch with deterministic algorithms), so re-running a spec reproduces the
FQW file byte for byte.  Training that fails to clear the accuracy gate
raises instead of writing a broken fixture.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass

import numpy as np
import torch

from . import fqw, idx
from .models import ARCHITECTURES

ACCURACY_GATE = 0.90


class TrainingDiverged(Exception):
    pass


@dataclass(frozen=True)
class TrainSpec:
    architecture: str = "fnn3"
    epochs: int = 10
    batch_size: int = 128
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch size >= 1")


def _accuracy(model, images: np.ndarray, labels: np.ndarray) -> float:
    model.eval()
    with torch.no_grad():
        out = model(torch.from_numpy(images))
    return float((out.argmax(dim=1).numpy() == labels).mean())


def train_and_export(spec: TrainSpec, data_dir, out_path) -> float:
    """Train per ``spec`` on ``data_dir`` and write ``out_path``; returns test accuracy."""
    torch.manual_seed(spec.seed)
    torch.set_num_threads(1)
    torch.use_deterministic_algorithms(True)

    train_x, train_y = idx.load_split(data_dir, "train")
    test_x, test_y = idx.load_split(data_dir, "test")
    model = ARCHITECTURES[spec.architecture]()
    optimizer = torch.optim.Adam(model.parameters(), lr=spec.learning_rate)
    loss_fn = torch.nn.CrossEntropyLoss()

    generator = torch.Generator().manual_seed(spec.seed)
    xs = torch.from_numpy(train_x)
    ys = torch.from_numpy(train_y)
    n = xs.shape[0]
    model.train()
    for _ in range(spec.epochs):
        order = torch.randperm(n, generator=generator)
        for start in range(0, n, spec.batch_size):
            batch = order[start : start + spec.batch_size]
            optimizer.zero_grad()
            loss = loss_fn(model(xs[batch]), ys[batch])
            loss.backward()
            optimizer.step()

    accuracy = _accuracy(model, test_x, test_y)
    if accuracy < ACCURACY_GATE:
        raise TrainingDiverged(
            f"test accuracy {accuracy:.4f} below the {ACCURACY_GATE:.2f} gate; "
            "fixture not written"
        )
    metadata = {"trainer": "fq-exporter", **asdict(spec), "test_accuracy": accuracy}
    fqw.write_fqw(out_path, model.export_layers(), metadata=metadata)
    return accuracy


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fq-exporter",
        description="Train a fixture classifier on an IDX dataset and export FQW weights.",
    )
    parser.add_argument("--arch", choices=sorted(ARCHITECTURES), default="fnn3")
    parser.add_argument("--data", required=True, help="dataset directory (IDX files)")
    parser.add_argument("--out", required=True, help="FQW output path")
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--batch-size", type=int, default=128)
    parser.add_argument("--lr", type=float, default=1e-3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    spec = TrainSpec(
        architecture=args.arch,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        seed=args.seed,
    )
    try:
        accuracy = train_and_export(spec, args.data, args.out)
    except (TrainingDiverged, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"out": args.out, "test_accuracy": accuracy, **asdict(spec)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
