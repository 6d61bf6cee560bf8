"""Fixture trainer: MNIST-layout classifiers exported as FQW weight files."""

from .train import TrainSpec, train_and_export

__version__ = "0.1.0"
