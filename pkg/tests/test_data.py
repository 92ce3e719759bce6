import struct

import numpy as np
import pytest

from discolab.classifier import ClassifierConfig, ClassifierModel, classifier_forward
from discolab.data import (
    LabeledDataset,
    PairDataset,
    draw_shape,
    dten,
    gen_synthetic,
    load_checkpoint,
    load_cifar10,
    parse_cifar10,
    random_crop_pair,
    save_checkpoint,
)
from discolab.disco import DiscoConfig, DiscoModel, disco_forward
from discolab.tensor import no_grad


# -- synthetic -------------------------------------------------------------------
def test_synthetic_stratified_and_in_range():
    ds = gen_synthetic(80, class_count=8, side=16, noise_std=0.05, seed=3)
    assert np.bincount(ds.labels).tolist() == [10] * 8
    assert ds.images.shape == (80, 3, 16, 16)
    assert ds.images.min() >= 0 and ds.images.max() <= 1


def test_synthetic_deterministic():
    a = gen_synthetic(16, 8, 32, 0.02, seed=5)
    b = gen_synthetic(16, 8, 32, 0.02, seed=5)
    assert a.images.tobytes() == b.images.tobytes()
    c = gen_synthetic(16, 8, 32, 0.02, seed=6)
    assert a.images.tobytes() != c.images.tobytes()


def test_noise_free_draw_repeats():
    one = draw_shape(0, 32, np.random.default_rng([7, 4]), 0.0)
    two = draw_shape(0, 32, np.random.default_rng([7, 4]), 0.0)
    np.testing.assert_array_equal(one, two)


def test_synthetic_rejects_uneven_split():
    with pytest.raises(ValueError):
        gen_synthetic(81, 8, 32)


def test_classes_not_separable_by_mean_colour():
    ds = gen_synthetic(400, 8, 32, 0.0, seed=1)
    means = ds.images.mean(axis=(2, 3))
    per_class = np.stack([means[ds.labels == c].mean(axis=0) for c in range(8)])
    assert np.ptp(per_class, axis=0).max() < 0.15


# -- cifar -----------------------------------------------------------------------
def _record(label, pixels):
    return bytes([label]) + bytes(pixels)


def test_cifar_decode_matches_byte_oracle(tmp_path):
    rng = np.random.default_rng(0)
    pix = [rng.integers(0, 256, size=3072).tolist() for _ in range(2)]
    pix[0][0] = 255
    pix[0][1] = 0
    buf = _record(7, pix[0]) + _record(2, pix[1])
    path = tmp_path / "batch.bin"
    path.write_bytes(buf)
    ds = load_cifar10(path)
    assert len(buf) == 6146 and ds.images.shape == (2, 3, 32, 32)
    assert ds.labels.tolist() == [7, 2]
    assert ds.images[0, 0, 0, 0] == 1.0 and ds.images[0, 0, 0, 1] == 0.0
    for n in range(2):
        for c, y, x in [(0, 0, 0), (1, 5, 9), (2, 31, 31), (2, 17, 3)]:
            byte = buf[n * 3073 + 1 + c * 1024 + y * 32 + x]
            assert ds.images[n, c, y, x] == np.float32(byte / 255)


def test_cifar_rejects_bad_length_and_label():
    with pytest.raises(ValueError):
        parse_cifar10(b"\x00" * 3072)
    with pytest.raises(ValueError):
        parse_cifar10(_record(10, [0] * 3072))


# -- crops -----------------------------------------------------------------------
def test_full_crop_is_whole_image():
    rng = np.random.default_rng(0)
    a, b = rng.random((3, 8, 8)), rng.random((3, 8, 8))
    pa, pb, off = random_crop_pair(a, b, 8, rng)
    np.testing.assert_array_equal(pa, a)
    np.testing.assert_array_equal(pb, b)
    assert off == (0, 0)


def test_crop_offsets_shared_and_seeded():
    a = np.arange(3 * 32 * 32, dtype=np.float32).reshape(3, 32, 32)
    b = a + 0.5
    rng1, rng2 = np.random.default_rng(4), np.random.default_rng(4)
    for _ in range(1000):
        pa, pb, off = random_crop_pair(a, b, 16, rng1)
        np.testing.assert_array_equal(pb - pa, 0.5)
        i, j = off
        np.testing.assert_array_equal(pa, a[:, i : i + 16, j : j + 16])
        assert random_crop_pair(a, b, 16, rng2)[2] == off


def test_crop_too_large():
    with pytest.raises(ValueError):
        random_crop_pair(np.zeros((3, 8, 8)), np.zeros((3, 8, 8)), 9, np.random.default_rng())


# -- DTEN ------------------------------------------------------------------------
def test_dten_scalar_layout(tmp_path):
    path = tmp_path / "s.dten"
    dten.save(np.float32(1.5), path)
    raw = path.read_bytes()
    assert len(raw) == 16
    assert raw[:4] == bytes([0x44, 0x54, 0x45, 0x4E])
    assert struct.unpack("<IIf", raw[4:]) == (1, 0, 1.5)
    assert dten.load(path).shape == () and dten.load(path) == 1.5


def test_dten_image_roundtrip_bitwise(tmp_path):
    img = np.random.default_rng(1).random((3, 32, 32)).astype(np.float32)
    dten.save(img, tmp_path / "i.dten")
    assert dten.load(tmp_path / "i.dten").tobytes() == img.tobytes()


def test_dten_corruption(tmp_path):
    raw = dten.encode(np.ones((2, 3), np.float32))
    with pytest.raises(dten.DtenError):
        dten.decode(raw[:-1])
    with pytest.raises(dten.DtenError):
        dten.decode(b"XTEN" + raw[4:])
    with pytest.raises(dten.DtenError):
        dten.decode(raw[:4] + struct.pack("<I", 2) + raw[8:])


# -- datasets on disk ------------------------------------------------------------
def test_labeled_and_pair_roundtrip(tmp_path):
    ds = gen_synthetic(16, 8, 16, 0.0, seed=0)
    ds.save(tmp_path / "ds")
    back = LabeledDataset.load(tmp_path / "ds")
    assert back.images.tobytes() == ds.images.tobytes()
    assert back.labels.tolist() == ds.labels.tolist()
    pairs = PairDataset(ds.images, ds.images.copy(), {"attack": {"method": "pgd", "eps": 8 / 255}})
    pairs.save(tmp_path / "p")
    pb = PairDataset.load(tmp_path / "p")
    assert pb.provenance == pairs.provenance
    assert pb.adv.tobytes() == pairs.adv.tobytes()


# -- checkpoints ----------------------------------------------------------------
def test_disco_checkpoint_roundtrip(tmp_path):
    model = DiscoModel(DiscoConfig(blocks=1, channels=4, kernel=3, mlp_hidden=(8,)), seed=2)
    x = np.random.default_rng(0).random((3, 6, 6)).astype(np.float32)
    save_checkpoint(model, tmp_path / "ck")
    back = load_checkpoint(tmp_path / "ck")
    assert back.config.kernel == 3 and back.config == model.config
    with no_grad():
        a, b = disco_forward(model, x).data, disco_forward(back, x).data
    assert a.tobytes() == b.tobytes()


def test_classifier_checkpoint_roundtrip(tmp_path):
    model = ClassifierModel(ClassifierConfig(channels=(4,), hidden=8, class_count=3, input_side=16), seed=1)
    x = np.random.default_rng(0).random((2, 3, 16, 16)).astype(np.float32)
    save_checkpoint(model, tmp_path / "ck")
    back = load_checkpoint(tmp_path / "ck")
    with no_grad():
        assert classifier_forward(model, x).data.tobytes() == classifier_forward(back, x).data.tobytes()


def test_checkpoint_tampered_blob_count(tmp_path):
    model = DiscoModel(DiscoConfig(blocks=0, channels=2, kernel=1, mlp_hidden=()), seed=0)
    save_checkpoint(model, tmp_path / "ck")
    next((tmp_path / "ck").glob("*.dten")).unlink()
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "ck")
