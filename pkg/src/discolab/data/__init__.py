"""Datasets, pair crops and on-disk formats."""

from . import dten
from .checkpoint import load_checkpoint, save_checkpoint
from .cifar import load_cifar10, parse_cifar10
from .datasets import LabeledDataset, PairDataset, random_crop_pair
from .synthetic import SHAPES, draw_shape, gen_synthetic

__all__ = [
    "LabeledDataset",
    "PairDataset",
    "SHAPES",
    "draw_shape",
    "dten",
    "gen_synthetic",
    "load_checkpoint",
    "load_cifar10",
    "parse_cifar10",
    "random_crop_pair",
    "save_checkpoint",
]
