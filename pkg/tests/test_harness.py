import numpy as np
import pytest

from discolab.attacks import AttackConfig
from discolab.classifier import ClassifierConfig, ClassifierModel
from discolab.data import LabeledDataset, gen_synthetic
from discolab.defense import Defense, DefenseConfig, TrainHParams
from discolab.disco import DiscoConfig, DiscoModel
from discolab.evaluation import (
    CSV_COLUMNS,
    EvalReport,
    cost_ratio,
    emit_report,
    eval_sa_ra,
    format_report,
    read_report,
    timing_eval,
    transfer_eval,
)
from discolab.tensor import Tensor

CLF = ClassifierConfig(channels=(4,), hidden=8, class_count=8, input_side=16)
TINY_DISCO = DiscoConfig(blocks=1, channels=4, mlp_hidden=(8,), residual=True)
PGD = AttackConfig("pgd", eps=8 / 255, alpha=2 / 255, steps=2)


@pytest.fixture(scope="module")
def clf():
    return ClassifierModel(CLF, seed=0)


@pytest.fixture(scope="module")
def data():
    return gen_synthetic(16, 8, 16, 0.01, seed=0)


@pytest.fixture(scope="module")
def tiny():
    return DiscoModel(TINY_DISCO, seed=0)


# -- SA / RA ------------------------------------------------------------------------------------
def test_disabled_attack_gives_ra_equal_sa(clf, data, tiny):
    off = AttackConfig("pgd", steps=0)
    for defense in (None, Defense(tiny, DefenseConfig(k_def=2))):
        rep = eval_sa_ra(clf, data, off, defense)
        assert rep.ra == rep.sa


def test_oracle_defense_gives_ra_equal_sa(clf, data):
    clean = data.images.copy()
    rep = eval_sa_ra(clf, data, PGD, defense=lambda x: clean, batch_size=len(data))
    assert rep.ra == rep.sa


def test_hand_counted_sa_ra(clf, monkeypatch):
    # image id lives in pixel (0, 0, 0); clean ids 0-9, adversarial ids 10-19
    logits = np.zeros((20, 3))
    clean_pred = [0, 1, 2, 2, 1, 0, 0, 1, 2, 0]
    adv_pred = [1, 1, 0, 2, 0, 0, 2, 2, 2, 1]
    logits[np.arange(10), clean_pred] = 1
    logits[np.arange(10, 20), adv_pred] = 1
    labels = np.array([0, 1, 2, 0, 1, 0, 1, 1, 2, 0])
    # clean hits: 0 1 2 4 5 7 8 9 -> 8/10; adversarial hits: 1 5 8 -> 3/10

    def fake_forward(model, batch):
        ids = np.asarray(batch.data if isinstance(batch, Tensor) else batch)[:, 0, 0, 0].round().astype(int)
        return Tensor(logits[ids])

    monkeypatch.setattr("discolab.classifier.classifier_forward", fake_forward)
    images = np.zeros((10, 3, 16, 16))
    images[:, 0, 0, 0] = np.arange(10)
    adv = images.copy()
    adv[:, 0, 0, 0] += 10
    rep = eval_sa_ra(clf, LabeledDataset(images, labels, 3), PGD, adversarial=adv)
    assert (rep.sa, rep.ra, rep.avg) == (0.8, 0.3, 0.55)


def test_bpda_needs_defense(clf, data):
    with pytest.raises(ValueError):
        eval_sa_ra(clf, data, AttackConfig("bpda", steps=1, k_adv=1))


def test_bpda_with_identity_defense_matches_oblivious(clf, data):
    kw = dict(eps=8 / 255, alpha=2 / 255, steps=2)
    a = eval_sa_ra(clf, data, AttackConfig("bpda", k_adv=1, **kw), defense=lambda x: x)
    b = eval_sa_ra(clf, data, AttackConfig("pgd", **kw), defense=lambda x: x)
    assert (a.sa, a.ra) == (b.sa, b.ra)


def test_report_records_configs(clf, data, tiny):
    rep = eval_sa_ra(clf, data, PGD, Defense(tiny, DefenseConfig(k_def=2)), record_time=False)
    assert rep.defense_cfg.k_def == 2 and rep.n_eval == len(data) and rep.wall_time_s is None
    assert rep.avg == (rep.sa + rep.ra) / 2


def test_eval_empty_dataset(clf):
    with pytest.raises(ValueError):
        eval_sa_ra(clf, LabeledDataset(np.zeros((0, 3, 16, 16)), np.zeros(0, int), 8), PGD)


# -- transfer ------------------------------------------------------------------------------------
def test_transfer_single_cell_matches_eval(clf, data, tiny):
    tm = transfer_eval(clf, data, data, [PGD], [PGD], TINY_DISCO, TrainHParams(), pretrained={"pgd": tiny})
    rep = eval_sa_ra(clf, data, PGD, Defense(tiny, DefenseConfig()))
    assert tm.ra.shape == (1, 1) and tm.ra[0, 0] == rep.ra


def test_transfer_shape_and_training(clf, data):
    train = [PGD, AttackConfig("fgsm")]
    test = [PGD, AttackConfig("fgsm"), AttackConfig("bim", steps=2)]
    tm = transfer_eval(clf, data, data, train, test, TINY_DISCO, TrainHParams(steps=2, batch_size=2, crop_side=8))
    assert tm.ra.shape == (2, 3) and tm.train_labels == ["pgd", "fgsm"]
    assert ((tm.ra >= 0) & (tm.ra <= 1)).all() and len(tm.undefended_ra) == 3


def test_transfer_needs_attacks(clf, data):
    with pytest.raises(ValueError):
        transfer_eval(clf, data, data, [], [PGD], TINY_DISCO, TrainHParams())


# -- timing --------------------------------------------------------------------------------------
def test_timing_report(clf, data, tiny):
    cfg = AttackConfig("bpda", steps=1)
    tr = timing_eval(clf, tiny, [1, 2], data.images[:5], data.labels[:5], cfg)
    assert tr.k_values == [1, 2] and len(tr.attack_s) == len(tr.defense_s) == 2
    assert min(tr.attack_s + tr.defense_s) >= 0
    assert tr.image_size == (16, 16) and tr.n_c == clf.param_count() and tr.n_d == tiny.param_count()


def test_timing_needs_sorted_k(clf, data, tiny):
    with pytest.raises(ValueError):
        timing_eval(clf, tiny, [2, 1], data.images[:4], data.labels[:4], PGD)


# -- cost ratio -----------------------------------------------------------------------------------
def test_cost_ratio_examples():
    assert cost_ratio(10, 4, 0) == 2.5
    assert cost_ratio(7, 7, 1) == 2.0
    assert cost_ratio(36_500_000, 1_600_000, 5) == 27.8125


def test_cost_ratio_errors():
    with pytest.raises(ValueError):
        cost_ratio(1, 0, 1)
    with pytest.raises(ValueError):
        cost_ratio(1, 1, -1)


# -- report files ---------------------------------------------------------------------------------
def _report(**kw):
    base = dict(sa=0.9, ra=0.6, attack_cfg=PGD, n_eval=200, run_id="r1", dataset="synthetic")
    return EvalReport(**{**base, **kw})


def test_avg_and_bounds():
    assert _report().avg == 0.75
    with pytest.raises(ValueError):
        _report(sa=1.2)


def test_csv_columns_and_empty_k_adv():
    text = format_report([_report(), _report(defense_cfg=DefenseConfig(k_def=None, k_range=(1, 3)))])
    header, row, row2 = text.splitlines()
    assert tuple(header.split(",")) == CSV_COLUMNS
    fields = dict(zip(CSV_COLUMNS, row.split(",")))
    assert fields["k_adv"] == "" and fields["k_def"] == "" and fields["avg"] == "0.75"
    assert fields["eps"] == repr(8 / 255) and fields["wall_time_s"] == ""
    assert dict(zip(CSV_COLUMNS, row2.split(",")))["k_def"] == "1-3"


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_write_read_write_identical(tmp_path, fmt):
    reports = [
        _report(),
        _report(attack_cfg=AttackConfig("bpda", norm="2", eps=0.5, alpha=0.1, k_adv=2), defense_cfg=DefenseConfig(k_def=3), wall_time_s=1.25),
        _report(sa=1 / 3, ra=2 / 7, defense_cfg=DefenseConfig(k_def=None, k_range=(1, 3))),
    ]
    emit_report(reports, tmp_path / "a", fmt)
    back = read_report(tmp_path / "a", fmt)
    emit_report(back, tmp_path / "b", fmt)
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
    assert [(r.sa, r.ra, r.avg, r.attack_cfg.k_adv) for r in back] == [(r.sa, r.ra, r.avg, r.attack_cfg.k_adv) for r in reports]


def test_json_roundtrip_is_lossless(tmp_path):
    rep = _report(attack_cfg=AttackConfig("pgd", alpha=0.003, random_start=True, seed=9), defense_cfg=DefenseConfig(k_def=2, out_size=(8, 8)))
    emit_report(rep, tmp_path / "r.json", "json")
    back = read_report(tmp_path / "r.json", "json")[0]
    assert back.to_dict() == rep.to_dict()


def test_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        emit_report(_report(), tmp_path / "missing" / "r.csv")


def test_unknown_format():
    with pytest.raises(ValueError):
        format_report(_report(), "xml")
