"""Small CNN classifier used as the attack target and accuracy meter."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .data.datasets import LabeledDataset
from .nn import ParamModel, kaiming_uniform, zeros_param
from .tensor import Adam, Tensor, conv2d, linear, max_pool2d, no_grad, relu, reshape, softmax_cross_entropy


@dataclass
class ClassifierConfig:
    channels: tuple[int, ...] = (32, 64)
    kernel: int = 3
    hidden: int = 128
    class_count: int = 8
    input_side: int = 32
    in_channels: int = 3

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierConfig":
        known = {f.name for f in fields(cls)}
        d = {k: v for k, v in d.items() if k in known}
        if "channels" in d:
            d["channels"] = tuple(d["channels"])
        return cls(**d)


class ClassifierModel(ParamModel):
    """conv-ReLU-maxpool stages, then a ReLU hidden layer and a linear head."""

    architecture = "classifier"

    def __init__(self, config: ClassifierConfig | None = None, seed: int = 0, dtype=np.float32):
        super().__init__()
        self.config = config = config or ClassifierConfig()
        rng = np.random.default_rng(seed)
        k = config.kernel
        cin = config.in_channels
        for i, cout in enumerate(config.channels):
            self.params[f"conv{i}.weight"] = kaiming_uniform((cout, cin, k, k), cin * k * k, rng, dtype)
            self.params[f"conv{i}.bias"] = zeros_param((cout,), dtype)
            cin = cout
        side = config.input_side // 2 ** len(config.channels)
        if side < 1:
            raise ValueError("too many pooling stages for the input size")
        flat = cin * side * side
        self.params["fc1.weight"] = kaiming_uniform((config.hidden, flat), flat, rng, dtype)
        self.params["fc1.bias"] = zeros_param((config.hidden,), dtype)
        self.params["fc2.weight"] = kaiming_uniform((config.class_count, config.hidden), config.hidden, rng, dtype)
        self.params["fc2.bias"] = zeros_param((config.class_count,), dtype)

    def __call__(self, x) -> Tensor:
        return classifier_forward(self, x)


def classifier_forward(model: ClassifierModel, batch) -> Tensor:
    """Logits (N, class_count) for a batch (N, 3, H, W)."""
    x = batch if isinstance(batch, Tensor) else Tensor(np.asarray(batch, dtype=model.dtype))
    cfg = model.config
    if x.ndim != 4 or x.shape[1] != cfg.in_channels or x.shape[2:] != (cfg.input_side, cfg.input_side):
        raise ValueError(
            f"classifier expects (N, {cfg.in_channels}, {cfg.input_side}, {cfg.input_side}), got {x.shape}"
        )
    p = model.params
    pad = cfg.kernel // 2
    for i in range(len(cfg.channels)):
        x = max_pool2d(relu(conv2d(x, p[f"conv{i}.weight"], p[f"conv{i}.bias"], padding=pad)), 2)
    x = reshape(x, (x.shape[0], -1))
    x = relu(linear(x, p["fc1.weight"], p["fc1.bias"]))
    return linear(x, p["fc2.weight"], p["fc2.bias"])


def train_classifier(
    model: ClassifierModel,
    dataset: LabeledDataset,
    epochs: int = 20,
    batch_size: int = 32,
    lr: float = 1e-3,
    seed: int = 0,
) -> list[float]:
    """Mini-batch Adam on cross-entropy. Returns the mean loss of each epoch."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(seed)
    opt = Adam(model.parameters(), lr=lr)
    images = dataset.images.astype(model.dtype)
    history = []
    for _ in range(epochs):
        order = rng.permutation(len(dataset))
        total = 0.0
        for start in range(0, len(order), batch_size):
            idx = order[start : start + batch_size]
            opt.zero_grad()
            loss = softmax_cross_entropy(classifier_forward(model, images[idx]), dataset.labels[idx])
            loss.backward()
            opt.step()
            total += float(loss.data) * len(idx)
        history.append(total / len(order))
    return history


def predict(model: ClassifierModel, images: np.ndarray, defense=None, batch_size: int = 100) -> np.ndarray:
    """Argmax labels (ties go to the lowest index), optionally after a defense."""
    out = []
    with no_grad():
        for start in range(0, len(images), batch_size):
            x = np.asarray(images[start : start + batch_size], dtype=model.dtype)
            if defense is not None:
                x = np.asarray(defense(x), dtype=model.dtype)
            out.append(np.argmax(classifier_forward(model, x).data, axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def accuracy(model: ClassifierModel, dataset: LabeledDataset, defense=None, batch_size: int = 100) -> float:
    if len(dataset) == 0:
        return 0.0
    return float(np.mean(predict(model, dataset.images, defense, batch_size) == dataset.labels))
