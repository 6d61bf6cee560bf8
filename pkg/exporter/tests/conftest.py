import subprocess
import sys

import pytest

from fq_exporter import TrainSpec, surrogate, train_and_export

FRAMEQUANT = [sys.executable, "-m", "framequant.cli"]


def run_framequant(*args):
    """Drive the quantization toolkit through its command-line interface."""
    proc = subprocess.run(
        [*FRAMEQUANT, *map(str, args)], capture_output=True, text=True
    )
    return proc


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory):
    """Surrogate digits dataset in MNIST IDX layout (offline stand-in)."""
    out = tmp_path_factory.mktemp("surrogate-data")
    surrogate.build(out, test_size=300, seed=0)
    return out


@pytest.fixture(scope="session")
def fnn3_fixture(tmp_path_factory, dataset_dir):
    """A trained 3-layer fixture: (fqw path, test accuracy)."""
    out = tmp_path_factory.mktemp("fixtures") / "fnn3.fqw"
    spec = TrainSpec(architecture="fnn3", epochs=30, batch_size=64, seed=0)
    accuracy = train_and_export(spec, dataset_dir, out)
    return out, accuracy


@pytest.fixture(scope="session")
def residual2_fixture(tmp_path_factory, dataset_dir):
    out = tmp_path_factory.mktemp("fixtures-res") / "residual2.fqw"
    spec = TrainSpec(architecture="residual2", epochs=20, batch_size=64, seed=0)
    accuracy = train_and_export(spec, dataset_dir, out)
    return out, accuracy
