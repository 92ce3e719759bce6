"""White-box attacks: FGSM, BIM, PGD (L-inf / L2) and BPDA through a purifier."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Callable

import numpy as np

from .tensor import Tensor, no_grad, softmax_cross_entropy

METHODS = ("fgsm", "bim", "pgd", "bpda")
NORMS = ("inf", "2")


def _norm_key(norm) -> str:
    key = str(norm).lower().replace("l", "")
    if key in ("inf", "infinity", "linf"):
        return "inf"
    if key in ("2", "2.0"):
        return "2"
    raise ValueError(f"unsupported norm {norm!r}")


@dataclass
class AttackConfig:
    method: str = "pgd"
    norm: str = "inf"
    eps: float = 8 / 255
    alpha: float = 2 / 255
    steps: int = 20
    random_start: bool = False
    k_adv: int | None = None
    seed: int = 0

    def __post_init__(self):
        self.norm = _norm_key(self.norm)
        if self.method not in METHODS:
            raise ValueError(f"unknown attack method {self.method!r}")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.steps > 0 and not self.alpha > 0:
            raise ValueError("alpha must be positive when steps > 0")

    @property
    def label(self) -> str:
        return self.method if self.norm == "inf" else f"{self.method}-l2"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "AttackConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def perturbation_norm(x_adv: np.ndarray, x: np.ndarray, norm) -> np.ndarray:
    """Per-example ||x_adv - x||_p."""
    d = (np.asarray(x_adv, np.float64) - np.asarray(x, np.float64)).reshape(len(x), -1)
    if _norm_key(norm) == "inf":
        return np.abs(d).max(axis=1) if d.shape[1] else np.zeros(len(x))
    return np.sqrt((d * d).sum(axis=1))


def project_ball(x: np.ndarray, x0: np.ndarray, eps: float, norm) -> np.ndarray:
    """Project onto the eps-ball around ``x0`` and then onto [0, 1]."""
    if x.shape != x0.shape:
        raise ValueError("project_ball: shape mismatch")
    dt = x0.dtype
    eps = dt.type(eps)
    if _norm_key(norm) == "inf":
        x = np.clip(x, x0 - eps, x0 + eps)
    else:
        delta = x - x0
        n = np.sqrt((delta.reshape(len(x), -1).astype(np.float64) ** 2).sum(axis=1))
        scale = np.where(n > eps, eps / np.maximum(n, 1e-30), 1.0).astype(dt)
        x = x0 + delta * scale.reshape((-1,) + (1,) * (x.ndim - 1))
    return np.clip(x, 0, 1).astype(dt)


def input_grad(model, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of the summed cross-entropy with respect to the input batch."""
    xt = Tensor(np.array(x, dtype=model.dtype), requires_grad=True)
    loss = softmax_cross_entropy(model(xt), y)
    loss.backward(np.asarray(len(x), dtype=loss.dtype))
    return xt.grad


def fgsm(model, x: np.ndarray, y: np.ndarray, eps: float) -> np.ndarray:
    x = np.asarray(x, dtype=model.dtype)
    g = input_grad(model, x, y)
    return np.clip(x + x.dtype.type(eps) * np.sign(g), 0, 1).astype(x.dtype)


def _random_start(x0: np.ndarray, cfg: AttackConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.norm == "inf":
        noise = rng.uniform(-cfg.eps, cfg.eps, size=x0.shape)
    else:
        d = x0[0].size
        direction = rng.normal(size=(len(x0), d))
        direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-30)
        radius = cfg.eps * rng.uniform(size=(len(x0), 1)) ** (1.0 / d)
        noise = (direction * radius).reshape(x0.shape)
    return project_ball((x0 + noise).astype(x0.dtype), x0, cfg.eps, cfg.norm)


def _iterate(x0: np.ndarray, cfg: AttackConfig, grad_fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    xa = x0.copy()
    if cfg.random_start:
        xa = _random_start(x0, cfg, np.random.default_rng(cfg.seed))
    alpha = x0.dtype.type(cfg.alpha)
    for _ in range(cfg.steps):
        g = grad_fn(xa)
        if cfg.norm == "inf":
            step = alpha * np.sign(g)
        else:
            gn = np.sqrt((g.reshape(len(g), -1).astype(np.float64) ** 2).sum(axis=1))
            scale = np.where(gn > 0, 1.0 / np.maximum(gn, 1e-30), 0.0).astype(g.dtype)
            step = alpha * g * scale.reshape((-1,) + (1,) * (g.ndim - 1))
        xa = project_ball(xa + step, x0, cfg.eps, cfg.norm)
    return xa


def bim(model, x: np.ndarray, y: np.ndarray, cfg: AttackConfig) -> np.ndarray:
    """Iterated FGSM in the L-inf ball, without random start."""
    if cfg.norm != "inf":
        raise ValueError("BIM is defined for the L-inf norm only")
    x0 = np.asarray(x, dtype=model.dtype)
    plain = AttackConfig(**{**cfg.to_dict(), "method": "bim", "random_start": False})
    return _iterate(x0, plain, lambda xa: input_grad(model, xa, y))


def pgd(model, x: np.ndarray, y: np.ndarray, cfg: AttackConfig) -> np.ndarray:
    x0 = np.asarray(x, dtype=model.dtype)
    return _iterate(x0, cfg, lambda xa: input_grad(model, xa, y))


def bpda_attack(classifier, defense, x: np.ndarray, y: np.ndarray, cfg: AttackConfig) -> np.ndarray:
    """PGD through ``defense`` with an identity backward pass.

    ``defense`` is either a purifier model, run as a ``cfg.k_adv``-stage
    cascade, or a callable mapping a batch to its defended batch. The forward
    pass is classifier(defense(x)); the gradient taken at the defended image
    is applied to x as if the defense Jacobian were the identity.
    """
    if cfg.k_adv is None or cfg.k_adv < 1:
        raise ValueError("BPDA needs k_adv >= 1; use pgd for the oblivious setting")
    from .disco import DiscoModel, cascade

    if isinstance(defense, DiscoModel):
        model, k = defense, cfg.k_adv

        def defense(xa):
            return cascade(model, xa, k)

    x0 = np.asarray(x, dtype=classifier.dtype)

    def grad_fn(xa):
        with no_grad():
            xd = np.asarray(defense(xa), dtype=classifier.dtype)
        return input_grad(classifier, xd, y)

    return _iterate(x0, cfg, grad_fn)


def run_attack(classifier, x: np.ndarray, y: np.ndarray, cfg: AttackConfig, defense=None) -> np.ndarray:
    if cfg.method == "fgsm":
        return fgsm(classifier, x, y, cfg.eps)
    if cfg.method == "bim":
        return bim(classifier, x, y, cfg)
    if cfg.method == "pgd":
        return pgd(classifier, x, y, cfg)
    if defense is None:
        raise ValueError("BPDA needs a defense to attack through")
    return bpda_attack(classifier, defense, x, y, cfg)
