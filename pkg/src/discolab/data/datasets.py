"""Labeled image sets and adversarial/clean pair sets, with on-disk form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dten


@dataclass
class LabeledDataset:
    images: np.ndarray  # (N, 3, S, S) in [0, 1]
    labels: np.ndarray  # (N,) ints
    class_count: int
    name: str = "dataset"

    def __post_init__(self):
        self.images = np.asarray(self.images)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4 or len(self.images) != len(self.labels):
            raise ValueError("images must be (N, C, H, W) with one label per image")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ValueError("label outside [0, class_count)")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def side(self) -> int:
        return self.images.shape[-1]

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx)
        return LabeledDataset(self.images[idx], self.labels[idx], self.class_count, self.name)

    def save(self, path) -> None:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        dten.save(self.images, path / "images.dten")
        dten.save(self.labels.astype(np.float32), path / "labels.dten")
        manifest = {"kind": "labeled", "name": self.name, "class_count": self.class_count, "count": len(self)}
        (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "LabeledDataset":
        path = Path(path)
        manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
        images = dten.load(path / "images.dten")
        labels = dten.load(path / "labels.dten").astype(np.int64)
        if len(images) != manifest["count"] or len(labels) != manifest["count"]:
            raise ValueError("dataset manifest does not match its blobs")
        return cls(images, labels, manifest["class_count"], manifest.get("name", "dataset"))


@dataclass
class PairDataset:
    adv: np.ndarray  # (N, 3, S, S)
    cln: np.ndarray  # (N, 3, S, S)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.adv.shape != self.cln.shape:
            raise ValueError("adversarial and clean stacks must have the same shape")

    def __len__(self) -> int:
        return len(self.adv)

    def save(self, path) -> None:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        dten.save(self.adv, path / "adv.dten")
        dten.save(self.cln, path / "cln.dten")
        manifest = {"kind": "pairs", "count": len(self), "provenance": self.provenance}
        (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "PairDataset":
        path = Path(path)
        manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
        adv, cln = dten.load(path / "adv.dten"), dten.load(path / "cln.dten")
        if len(adv) != manifest["count"]:
            raise ValueError("pair manifest does not match its blobs")
        return cls(adv, cln, manifest["provenance"])


def random_crop_pair(adv: np.ndarray, cln: np.ndarray, crop_side: int, rng: np.random.Generator):
    """Crop both (C, H, W) images at one shared, uniformly drawn offset."""
    h, w = adv.shape[-2:]
    if crop_side > h or crop_side > w:
        raise ValueError(f"crop_side {crop_side} exceeds image size {h}x{w}")
    i = int(rng.integers(0, h - crop_side + 1))
    j = int(rng.integers(0, w - crop_side + 1))
    sl = (..., slice(i, i + crop_side), slice(j, j + crop_side))
    return adv[sl].copy(), cln[sl].copy(), (i, j)
