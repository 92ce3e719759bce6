"""Model checkpoints: a directory with manifest.json and one DTEN blob per parameter."""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import dten

FORMAT = "discolab-checkpoint"


def _builders():
    from ..classifier import ClassifierConfig, ClassifierModel
    from ..disco import DiscoConfig, DiscoModel

    return {
        "classifier": (ClassifierConfig, ClassifierModel),
        "disco": (DiscoConfig, DiscoModel),
    }


def save_checkpoint(model, path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for stale in path.glob("*.dten"):
        stale.unlink()
    entries = []
    for i, (name, p) in enumerate(model.named_parameters()):
        fname = f"p{i:03d}.dten"
        dten.save(p.data, path / fname)
        entries.append({"name": name, "file": fname, "shape": list(p.shape)})
    manifest = {
        "format": FORMAT,
        "version": 1,
        "architecture": model.architecture,
        "config": asdict(model.config),
        "parameters": entries,
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path):
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    if manifest.get("format") != FORMAT:
        raise ValueError("not a checkpoint manifest")
    builders = _builders()
    if manifest["architecture"] not in builders:
        raise ValueError(f"unknown architecture {manifest['architecture']!r}")
    cfg_cls, model_cls = builders[manifest["architecture"]]
    cfg = cfg_cls.from_dict(manifest["config"])
    model = model_cls(cfg, seed=0)
    entries = manifest["parameters"]
    blobs = sorted(p.name for p in path.glob("*.dten"))
    if len(blobs) != len(entries) or len(entries) != len(model.params):
        raise ValueError(
            f"checkpoint has {len(blobs)} blobs, manifest lists {len(entries)}, model needs {len(model.params)}"
        )
    for entry, (name, p) in zip(entries, model.named_parameters()):
        if entry["name"] != name:
            raise ValueError(f"parameter order mismatch: {entry['name']} vs {name}")
        arr = dten.load(path / entry["file"])
        if arr.shape != p.shape or tuple(entry["shape"]) != p.shape:
            raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {p.shape}")
        p.data = arr.astype(np.float32)
    return model
