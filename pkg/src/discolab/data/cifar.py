"""CIFAR-10 binary batches: 3073-byte records (label, 1024 R, 1024 G, 1024 B)."""

from __future__ import annotations

import numpy as np

from .datasets import LabeledDataset

RECORD = 3073


def parse_cifar10(buf: bytes) -> LabeledDataset:
    if len(buf) % RECORD:
        raise ValueError(f"CIFAR-10 data length {len(buf)} is not a multiple of {RECORD}")
    raw = np.frombuffer(buf, dtype=np.uint8).reshape(-1, RECORD)
    labels = raw[:, 0].astype(np.int64)
    if labels.size and labels.max() > 9:
        raise ValueError(f"label byte {labels.max()} out of range")
    images = raw[:, 1:].reshape(-1, 3, 32, 32).astype(np.float32) / np.float32(255)
    return LabeledDataset(images, labels, class_count=10)


def load_cifar10(path) -> LabeledDataset:
    with open(path, "rb") as fh:
        return parse_cifar10(fh.read())
