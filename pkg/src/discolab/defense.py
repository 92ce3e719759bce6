"""Pair curation, purifier training, and (cascaded / randomized) purification."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields

import numpy as np

from .attacks import AttackConfig, run_attack
from .classifier import ClassifierModel, predict
from .data.datasets import LabeledDataset, PairDataset, random_crop_pair
from .disco import DiscoModel, cascade, disco_forward
from .tensor import Adam, l1_loss

log = logging.getLogger(__name__)


@dataclass
class DefenseConfig:
    """Cascade depth, fixed (``k_def``) or drawn per image from ``k_range``."""

    k_def: int | None = 1
    k_range: tuple[int, int] | None = None
    out_size: tuple[int, int] | None = None  # None: same as input
    seed: int = 0

    def __post_init__(self):
        if self.k_range is not None:
            self.k_range = tuple(int(k) for k in self.k_range)
        if self.out_size is not None and self.out_size != "same":
            self.out_size = tuple(int(s) for s in self.out_size)
        elif self.out_size == "same":
            self.out_size = None
        if (self.k_def is None) == (self.k_range is None):
            raise ValueError("set exactly one of k_def and k_range")
        if self.k_def is not None and self.k_def < 1:
            raise ValueError("k_def must be >= 1")
        if self.k_range is not None and not 1 <= self.k_range[0] <= self.k_range[1]:
            raise ValueError("k_range must satisfy 1 <= k_min <= k_max")

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("k_range", "out_size"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DefenseConfig":
        known = {f.name for f in fields(cls)}
        d = {k: v for k, v in d.items() if k in known}
        if "k_range" in d and d["k_range"] is not None and "k_def" not in d:
            d["k_def"] = None
        return cls(**d)


@dataclass
class TrainHParams:
    lr: float = 1e-4
    batch_size: int = 16
    steps: int = 4000
    crop_side: int = 16
    seed: int = 0
    log_every: int = 0

    def __post_init__(self):
        if not self.lr >= 0:
            raise ValueError("lr must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainHParams":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def make_pairs(
    classifier: ClassifierModel,
    attack_cfg: AttackConfig,
    dataset: LabeledDataset,
    batch_size: int = 100,
    classifier_id: str = "classifier",
) -> PairDataset:
    """Attack each clean image against the classifier's own prediction.

    The adversarial target is the classifier's label for the clean image,
    not the ground truth.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    if attack_cfg.method == "bpda":
        raise ValueError("pairs are built against the bare classifier; use fgsm, bim or pgd")
    clean = dataset.images.astype(classifier.dtype)
    targets = predict(classifier, clean)
    adv = np.empty_like(clean)
    for start in range(0, len(clean), batch_size):
        sl = slice(start, start + batch_size)
        cfg = AttackConfig(**{**attack_cfg.to_dict(), "seed": attack_cfg.seed + start})
        adv[sl] = run_attack(classifier, clean[sl], targets[sl], cfg)
    provenance = {"attack": attack_cfg.to_dict(), "classifier": classifier_id, "dataset": dataset.name}
    return PairDataset(adv, clean, provenance)


def train_disco(model: DiscoModel, pairs: PairDataset, hp: TrainHParams) -> list[float]:
    """L1 regression of purified adversarial crops onto their clean crops.

    Each step draws ``batch_size`` pairs and one shared crop offset per pair,
    renders the crop grid, and takes one Adam step. Returns per-step losses.
    """
    side = pairs.adv.shape[-1]
    if hp.crop_side > min(pairs.adv.shape[-2:]):
        raise ValueError(f"crop_side {hp.crop_side} exceeds image side {side}")
    rng = np.random.default_rng(hp.seed)
    opt = Adam(model.parameters(), lr=hp.lr)
    history = []
    dt = model.dtype
    for step in range(hp.steps):
        idx = rng.integers(0, len(pairs), size=hp.batch_size)
        crops = [random_crop_pair(pairs.adv[i], pairs.cln[i], hp.crop_side, rng) for i in idx]
        adv = np.stack([c[0] for c in crops]).astype(dt)
        cln = np.stack([c[1] for c in crops]).astype(dt)
        opt.zero_grad()
        loss = l1_loss(disco_forward(model, adv, clamp_output=False), cln)
        loss.backward()
        opt.step()
        history.append(float(loss.data))
        if hp.log_every and (step + 1) % hp.log_every == 0:
            log.info("disco step %d loss %.5f", step + 1, np.mean(history[-hp.log_every :]))
    return history


def defend(model: DiscoModel, defense_cfg: DefenseConfig, x) -> np.ndarray:
    """Fixed-depth cascade: ``k_def`` purifier passes with shared weights."""
    if defense_cfg.k_def is None:
        raise ValueError("defend needs k_def; use randomized_defend for k_range")
    return cascade(model, x, defense_cfg.k_def, defense_cfg.out_size)


def randomized_defend(model: DiscoModel, defense_cfg: DefenseConfig, x, rng: np.random.Generator):
    """Draw K uniformly from k_range, then purify a single image. Returns (image, K)."""
    if defense_cfg.k_range is None:
        raise ValueError("randomized_defend needs k_range")
    k_min, k_max = defense_cfg.k_range
    k = int(rng.integers(k_min, k_max + 1))
    return cascade(model, x, k, defense_cfg.out_size), k


class Defense:
    """Batch callable wrapping a purifier and a DefenseConfig.

    With ``k_range`` each image gets its own K from a generator seeded by
    ``cfg.seed``; the draws are recorded in ``k_history``.
    """

    def __init__(self, model: DiscoModel, cfg: DefenseConfig | None = None):
        self.model = model
        self.cfg = cfg or DefenseConfig()
        self.rng = np.random.default_rng(self.cfg.seed)
        self.k_history: list[int] = []

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=self.model.dtype)
        if self.cfg.k_range is None:
            return defend(self.model, self.cfg, x)
        outs = []
        for img in x:
            out, k = randomized_defend(self.model, self.cfg, img[None], self.rng)
            self.k_history.append(k)
            outs.append(out[0])
        return np.stack(outs)


def classify_with_defense(classifier: ClassifierModel, model: DiscoModel | None, defense_cfg: DefenseConfig | None, x) -> np.ndarray:
    """Labels for a batch, purified first when a model is given."""
    x = np.asarray(x)
    if model is None:
        return predict(classifier, x)
    return predict(classifier, x, Defense(model, defense_cfg or DefenseConfig()))
