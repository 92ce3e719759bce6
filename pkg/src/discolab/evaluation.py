"""SA/RA measurement, attack-transfer grids, timing, and report files."""

from __future__ import annotations

import csv
import io
import json
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attacks import AttackConfig, bpda_attack, run_attack
from .classifier import ClassifierModel, accuracy, predict
from .data.datasets import LabeledDataset
from .defense import Defense, DefenseConfig, TrainHParams, defend, make_pairs, train_disco
from .disco import DiscoConfig, DiscoModel

CSV_COLUMNS = (
    "run_id", "dataset", "attack", "norm", "eps", "steps", "k_adv", "k_def",
    "sa", "ra", "avg", "n_eval", "seed", "wall_time_s",
)


@dataclass
class EvalReport:
    sa: float
    ra: float
    attack_cfg: AttackConfig
    defense_cfg: DefenseConfig | None = None
    n_eval: int = 0
    seed: int = 0
    run_id: str = "run"
    dataset: str = "dataset"
    wall_time_s: float | None = None
    avg: float = field(init=False)

    def __post_init__(self):
        if not (0 <= self.sa <= 1 and 0 <= self.ra <= 1):
            raise ValueError("accuracies must lie in [0, 1]")
        self.avg = (self.sa + self.ra) / 2

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "dataset": self.dataset,
            "attack": self.attack_cfg.to_dict(),
            "defense": None if self.defense_cfg is None else self.defense_cfg.to_dict(),
            "sa": self.sa,
            "ra": self.ra,
            "avg": self.avg,
            "n_eval": self.n_eval,
            "seed": self.seed,
            "wall_time_s": self.wall_time_s,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        rep = cls(
            sa=d["sa"],
            ra=d["ra"],
            attack_cfg=AttackConfig.from_dict(d["attack"]),
            defense_cfg=None if d.get("defense") is None else DefenseConfig.from_dict(d["defense"]),
            n_eval=d["n_eval"],
            seed=d["seed"],
            run_id=d["run_id"],
            dataset=d["dataset"],
            wall_time_s=d.get("wall_time_s"),
        )
        if rep.avg != d["avg"]:
            raise ValueError("avg column disagrees with (sa + ra) / 2")
        return rep


@dataclass
class TransferMatrix:
    train_labels: list[str]
    test_labels: list[str]
    ra: np.ndarray  # (len(train), len(test))
    undefended_ra: list[float]
    reports: list[list[EvalReport]]


@dataclass
class TimingReport:
    k_values: list[int]
    attack_s: list[float]
    defense_s: list[float]
    image_size: tuple[int, int]
    n_c: int
    n_d: int


# -- SA / RA -----------------------------------------------------------------------
def _attack_batches(classifier, dataset, attack_cfg, defense, batch_size):
    adv = np.empty(dataset.images.shape, dtype=classifier.dtype)
    for start in range(0, len(dataset), batch_size):
        sl = slice(start, start + batch_size)
        cfg = AttackConfig(**{**attack_cfg.to_dict(), "seed": attack_cfg.seed + start})
        x, y = dataset.images[sl], dataset.labels[sl]
        if cfg.method == "bpda":
            if defense is None:
                raise ValueError("the adaptive (BPDA) setting needs a defense")
            target = defense.model if isinstance(defense, Defense) else defense
            adv[sl] = bpda_attack(classifier, target, x, y, cfg)
        else:
            adv[sl] = run_attack(classifier, x, y, cfg)
    return adv


def eval_sa_ra(
    classifier: ClassifierModel,
    dataset: LabeledDataset,
    attack_cfg: AttackConfig,
    defense=None,
    batch_size: int = 100,
    run_id: str = "run",
    record_time: bool = True,
    adversarial: np.ndarray | None = None,
) -> EvalReport:
    """Clean (SA) and adversarial (RA) accuracy, each through the optional defense.

    FGSM/BIM/PGD attack the bare classifier (oblivious setting); BPDA attacks
    through the defense with ``attack_cfg.k_adv`` stages (adaptive setting).
    Precomputed ``adversarial`` images skip the attack step.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    t0 = time.perf_counter()
    sa = accuracy(classifier, dataset, defense, batch_size)
    if adversarial is None:
        adversarial = _attack_batches(classifier, dataset, attack_cfg, defense, batch_size)
    ra = float(np.mean(predict(classifier, adversarial, defense, batch_size) == dataset.labels))
    return EvalReport(
        sa=sa,
        ra=ra,
        attack_cfg=attack_cfg,
        defense_cfg=defense.cfg if isinstance(defense, Defense) else None,
        n_eval=len(dataset),
        seed=attack_cfg.seed,
        run_id=run_id,
        dataset=dataset.name,
        wall_time_s=time.perf_counter() - t0 if record_time else None,
    )


def adversarial_examples(classifier, dataset, attack_cfg, defense=None, batch_size: int = 100) -> np.ndarray:
    """The per-image adversarial set ``eval_sa_ra`` would build."""
    return _attack_batches(classifier, dataset, attack_cfg, defense, batch_size)


# -- transfer ------------------------------------------------------------------------
def transfer_eval(
    classifier: ClassifierModel,
    train_set: LabeledDataset,
    test_set: LabeledDataset,
    train_attacks: list[AttackConfig],
    test_attacks: list[AttackConfig],
    disco_config: DiscoConfig,
    hp: TrainHParams,
    defense_cfg: DefenseConfig | None = None,
    pretrained: dict[str, DiscoModel] | None = None,
) -> TransferMatrix:
    """RA of a purifier trained on each train attack, under each test attack.

    ``pretrained`` maps a train-attack label to an already trained purifier,
    which is then used instead of building pairs and training a new one.
    """
    if not train_attacks or not test_attacks:
        raise ValueError("need at least one train and one test attack")
    pretrained = pretrained or {}
    defense_cfg = defense_cfg or DefenseConfig()
    adv_sets = [adversarial_examples(classifier, test_set, a) for a in test_attacks]
    undefended = [float(np.mean(predict(classifier, adv) == test_set.labels)) for adv in adv_sets]
    grid = np.zeros((len(train_attacks), len(test_attacks)))
    reports = []
    for i, tr in enumerate(train_attacks):
        model = pretrained.get(tr.label)
        if model is None:
            model = DiscoModel(disco_config, seed=hp.seed)
            train_disco(model, make_pairs(classifier, tr, train_set), hp)
        row = []
        for j, (te, adv) in enumerate(zip(test_attacks, adv_sets)):
            rep = eval_sa_ra(classifier, test_set, te, Defense(model, defense_cfg), run_id=f"{tr.label}->{te.label}", record_time=False, adversarial=adv)
            grid[i, j] = rep.ra
            row.append(rep)
        reports.append(row)
    return TransferMatrix([a.label for a in train_attacks], [a.label for a in test_attacks], grid, undefended, reports)


# -- timing ----------------------------------------------------------------------------
def timing_eval(
    classifier: ClassifierModel,
    model: DiscoModel,
    k_values: list[int],
    images: np.ndarray,
    labels: np.ndarray,
    attack_cfg: AttackConfig,
    warmup: int = 3,
) -> TimingReport:
    """Median per-image wall time of a K-stage BPDA attack and a K-stage defense.

    Images are processed one at a time; the first ``warmup`` images are run
    but not timed.
    """
    if list(k_values) != sorted(k_values):
        raise ValueError("k_values must be ascending")
    attack_s, defense_s = [], []
    for k in k_values:
        cfg = AttackConfig(**{**attack_cfg.to_dict(), "method": "bpda", "k_adv": k})
        dcfg = DefenseConfig(k_def=k)
        a_times, d_times = [], []
        for i in range(len(images)):
            x, y = images[i : i + 1], labels[i : i + 1]
            t0 = time.perf_counter()
            bpda_attack(classifier, model, x, y, cfg)
            t1 = time.perf_counter()
            defend(model, dcfg, x)
            t2 = time.perf_counter()
            if i >= warmup:
                a_times.append(t1 - t0)
                d_times.append(t2 - t1)
        attack_s.append(statistics.median(a_times))
        defense_s.append(statistics.median(d_times))
    return TimingReport(
        list(k_values), attack_s, defense_s, tuple(images.shape[-2:]), classifier.param_count(), model.param_count()
    )


def cost_ratio(n_c: int, n_d: int, k: int) -> float:
    """Attack-to-defense memory ratio K + N_c / N_d of a K-stage cascade."""
    if n_d <= 0:
        raise ValueError("n_d must be positive")
    if k < 0:
        raise ValueError("k must be >= 0")
    return k + n_c / n_d


# -- report files ------------------------------------------------------------------------
def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv_row(r: EvalReport) -> list[str]:
    d = r.defense_cfg
    if d is None:
        k_def = ""
    elif d.k_range is not None:
        k_def = f"{d.k_range[0]}-{d.k_range[1]}"
    else:
        k_def = str(d.k_def)
    a = r.attack_cfg
    return [
        r.run_id, r.dataset, a.method, a.norm, _fmt(float(a.eps)), str(a.steps), _fmt(a.k_adv), k_def,
        _fmt(float(r.sa)), _fmt(float(r.ra)), _fmt(float(r.avg)), str(r.n_eval), str(r.seed),
        _fmt(None if r.wall_time_s is None else float(r.wall_time_s)),
    ]


def format_report(reports, fmt: str = "csv") -> str:
    reports = [reports] if isinstance(reports, EvalReport) else list(reports)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in reports:
            w.writerow(_csv_row(r))
        return buf.getvalue()
    if fmt == "json":
        return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def emit_report(reports, path, fmt: str = "csv") -> None:
    Path(path).write_text(format_report(reports, fmt), encoding="utf-8")


def parse_report(text: str, fmt: str = "csv") -> list[EvalReport]:
    if fmt == "json":
        return [EvalReport.from_dict(d) for d in json.loads(text)]
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for row in rows:
        k_def = row["k_def"]
        if not k_def:
            dcfg = None
        elif "-" in k_def:
            lo, hi = k_def.split("-")
            dcfg = DefenseConfig(k_def=None, k_range=(int(lo), int(hi)))
        else:
            dcfg = DefenseConfig(k_def=int(k_def))
        attack = AttackConfig(
            method=row["attack"], norm=row["norm"], eps=float(row["eps"]), steps=int(row["steps"]),
            k_adv=int(row["k_adv"]) if row["k_adv"] else None, seed=int(row["seed"]),
        )
        rep = EvalReport(
            sa=float(row["sa"]), ra=float(row["ra"]), attack_cfg=attack, defense_cfg=dcfg,
            n_eval=int(row["n_eval"]), seed=int(row["seed"]), run_id=row["run_id"], dataset=row["dataset"],
            wall_time_s=float(row["wall_time_s"]) if row["wall_time_s"] else None,
        )
        if repr(rep.avg) != row["avg"]:
            raise ValueError("avg column disagrees with (sa + ra) / 2")
        out.append(rep)
    return out


def read_report(path, fmt: str = "csv") -> list[EvalReport]:
    return parse_report(Path(path).read_text(encoding="utf-8"), fmt)
