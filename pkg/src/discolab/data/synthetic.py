"""Procedural shape images standing in for a natural-image dataset.

Each class is a shape drawn in a random foreground colour over a random
background colour, at a random position and scale. Colours are independent
of the class, so a classifier has to look at spatial structure.
"""

from __future__ import annotations

import numpy as np

from .datasets import LabeledDataset

SHAPES = ("disk", "square", "cross", "stripes_h", "stripes_v", "ring", "triangle", "checker")


def _mask(shape: str, side: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64) + 0.5
    r = rng.uniform(0.3, 0.4) * side
    cy, cx = side / 2 + rng.uniform(-1, 1, size=2) * min(side / 2 - r, 0.15 * side)
    dy, dx = yy - cy, xx - cx
    dist = np.hypot(dy, dx)
    if shape == "disk":
        return dist <= r
    if shape == "square":
        return np.maximum(np.abs(dy), np.abs(dx)) <= 0.85 * r
    if shape == "cross":
        arm = r / 3
        return ((np.abs(dy) <= arm) & (np.abs(dx) <= r)) | ((np.abs(dx) <= arm) & (np.abs(dy) <= r))
    if shape == "ring":
        return (dist <= r) & (dist >= 0.5 * r)
    if shape == "triangle":
        top = cy - r
        return (dy <= r) & (yy >= top) & (np.abs(dx) <= 0.5 * (yy - top))
    period = int(rng.integers(3, 6))
    py, px = rng.integers(0, 2 * period, size=2)
    if shape == "stripes_h":
        return ((yy.astype(int) + py) // period) % 2 == 0
    if shape == "stripes_v":
        return ((xx.astype(int) + px) // period) % 2 == 0
    if shape == "checker":
        return (((yy.astype(int) + py) // period + (xx.astype(int) + px) // period) % 2) == 0
    raise ValueError(f"unknown shape {shape!r}")


def draw_shape(class_id: int, side: int, rng: np.random.Generator, noise_std: float = 0.0) -> np.ndarray:
    """One (3, side, side) float32 image of ``SHAPES[class_id]``."""
    mask = _mask(SHAPES[class_id], side, rng)
    while True:
        fg, bg = rng.uniform(0.0, 1.0, size=(2, 3))
        if np.linalg.norm(fg - bg) >= 0.5:
            break
    img = np.where(mask[None], fg[:, None, None], bg[:, None, None])
    if noise_std > 0:
        img = img + rng.normal(0.0, noise_std, size=img.shape)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def gen_synthetic(n: int, class_count: int = 8, side: int = 32, noise_std: float = 0.02, seed: int = 0) -> LabeledDataset:
    """Stratified shape dataset; image ``i`` has class ``i % class_count``.

    Image ``i`` is drawn from its own stream seeded with ``(seed, i)``, so it
    does not depend on ``n``.
    """
    if not 1 <= class_count <= len(SHAPES):
        raise ValueError(f"class_count must be in [1, {len(SHAPES)}]")
    if n % class_count:
        raise ValueError(f"n={n} is not divisible by class_count={class_count}")
    if side < 16:
        raise ValueError("side must be at least 16")
    labels = np.arange(n) % class_count
    images = np.stack(
        [draw_shape(int(c), side, np.random.default_rng([seed, i]), noise_std) for i, c in enumerate(labels)]
    ) if n else np.zeros((0, 3, side, side), np.float32)
    return LabeledDataset(images, labels, class_count, name="synthetic")
