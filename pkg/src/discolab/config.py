"""Run-config files: one JSON object with sections data, classifier, attack, disco, defense, eval.

Paths inside the file are resolved against ``workdir``, which is itself
relative to the directory holding the config file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .attacks import AttackConfig
from .classifier import ClassifierConfig
from .defense import DefenseConfig, TrainHParams
from .disco import DiscoConfig

SECTIONS = ("data", "classifier", "attack", "disco", "defense", "eval")


class ConfigError(ValueError):
    """The run-config is missing, malformed, or holds invalid values."""


def _names(cls) -> set[str]:
    return {f.name for f in fields(cls)}


@dataclass
class DataSection:
    source: str = "synthetic"  # or "cifar10"
    n_train: int = 800
    n_test: int = 200
    class_count: int = 8
    side: int = 32
    noise_std: float = 0.005
    seed: int = 0
    cifar_train: list[str] = field(default_factory=list)
    cifar_test: list[str] = field(default_factory=list)
    train: str = "data/train"
    test: str = "data/test"


@dataclass
class ClassifierSection:
    model: ClassifierConfig
    epochs: int = 20
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    checkpoint: str = "classifier"


@dataclass
class DiscoSection:
    model: DiscoConfig
    train: TrainHParams
    seed: int = 0
    checkpoint: str = "disco"
    pairs: str = "pairs/train"
    heldout_pairs: str = "pairs/test"


@dataclass
class EvalSection:
    report: str = "report.csv"
    format: str = "csv"
    run_id: str = "run"
    n_eval: int | None = None
    batch_size: int = 100
    baseline: bool = True
    record_wall_time: bool = False
    k_values: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    timing_images: int = 23
    timing_report: str = "timing.json"
    n_c: int | None = None
    transfer_train: list[dict] = field(default_factory=list)
    transfer_test: list[dict] = field(default_factory=list)
    transfer_report: str = "transfer.json"
    input: str | None = None
    output: str | None = None


@dataclass
class RunConfig:
    root: Path
    data: DataSection
    classifier: ClassifierSection
    attack: AttackConfig
    disco: DiscoSection
    defense: DefenseConfig | None
    eval: EvalSection

    def path(self, p: str) -> Path:
        return self.root / p


def _split(section: dict, name: str, allowed: set[str]) -> dict:
    if not isinstance(section, dict):
        raise ConfigError(f"section {name!r} must be an object")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return section


def parse_config(raw: dict, base_dir: Path = Path("."), seed: int | None = None) -> RunConfig:
    """Validate a decoded config object. ``seed`` overrides every seed field."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - set(SECTIONS) - {"workdir"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    try:
        d = dict(_split(raw.get("data", {}), "data", _names(DataSection)))
        c = dict(_split(raw.get("classifier", {}), "classifier", _names(ClassifierConfig) | _names(ClassifierSection)))
        a = dict(_split(raw.get("attack", {}), "attack", _names(AttackConfig)))
        disco_keys = _names(DiscoConfig) | {"seed", "checkpoint", "pairs", "heldout_pairs", "train"}
        m = dict(_split(raw.get("disco", {}), "disco", disco_keys))
        t = dict(_split(m.pop("train", {}), "disco.train", _names(TrainHParams)))
        f = dict(_split(raw.get("defense", {}), "defense", _names(DefenseConfig) | {"enabled"}))
        e = dict(_split(raw.get("eval", {}), "eval", _names(EvalSection)))
        if seed is not None:
            for sec in (d, c, a, m, t, f):
                sec["seed"] = seed
        clf_model = ClassifierConfig.from_dict(c)
        clf = ClassifierSection(clf_model, **{k: v for k, v in c.items() if k in _names(ClassifierSection) - {"model"}})
        disco = DiscoSection(
            DiscoConfig.from_dict(m),
            TrainHParams.from_dict(t),
            **{k: v for k, v in m.items() if k in {"seed", "checkpoint", "pairs", "heldout_pairs"}},
        )
        enabled = f.pop("enabled", True)
        defense = DefenseConfig.from_dict(f) if enabled else None
        ev = EvalSection(**e)
        data = DataSection(**d)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    if data.source not in ("synthetic", "cifar10"):
        raise ConfigError(f"unknown data source {data.source!r}")
    if clf_model.input_side != data.side:
        raise ConfigError("classifier.input_side must equal data.side")
    if data.source == "synthetic" and clf_model.class_count != data.class_count:
        raise ConfigError("classifier.class_count must equal data.class_count")
    if ev.format not in ("csv", "json"):
        raise ConfigError(f"unknown report format {ev.format!r}")
    try:
        attack = AttackConfig.from_dict(a)
        for entry in ev.transfer_train + ev.transfer_test:
            AttackConfig.from_dict(entry)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    root = Path(base_dir) / raw.get("workdir", ".")
    return RunConfig(root, data, clf, attack, disco, defense, ev)


def load_config(path, seed: int | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw, path.parent, seed)
