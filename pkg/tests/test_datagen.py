import gzip
import math
import struct

import numpy as np
import pytest

from genlab.datagen import (FormatError, LabeledDataset, LinearSetupParams, corrupt_labels, exp_bad_dataset,
                            exp_conditions, gen_exp, gen_hypersphere, gen_linear, hypersphere_bad_dataset,
                            linear_bad_dataset, linear_conditions, linear_thresholds, load_idx,
                            load_mnist_subset, min_linear_N, read_csv, write_csv)
from genlab.linalg import InvalidInput, make_rng


def test_linear_block_norms():
    p = LinearSetupParams(m=25, N=50)
    S = gen_linear(p, 0)
    assert S.dim == 52
    np.testing.assert_allclose(np.linalg.norm(S.inputs[:, :2], axis=1), 2 / 5, rtol=1e-14)
    assert np.linalg.norm(S.meta["u"]) == pytest.approx(1 / 5, rel=1e-14)
    with pytest.raises(InvalidInput):
        gen_linear(p, 0, m=0)


def test_linear_noise_moment():
    S = gen_linear(LinearSetupParams(m=1000, N=1000), 1)
    assert np.mean(np.sum(S.inputs[:, 2:] ** 2, axis=1)) == pytest.approx(32, rel=0.05)


def test_linear_labels_balanced():
    ok = 0
    for t in range(100):
        S = gen_linear(LinearSetupParams(m=100, N=5), t)
        ok += abs(S.labels.sum()) <= 3 * math.sqrt(100)
    assert ok >= 95


def test_linear_bad_dataset():
    S = gen_linear(LinearSetupParams(m=30, N=10), 2)
    B = linear_bad_dataset(S)
    np.testing.assert_array_equal(B.labels, S.labels)
    np.testing.assert_array_equal(B.inputs[:, :2], S.inputs[:, :2])
    np.testing.assert_array_equal(B.inputs[:, 2:], -S.inputs[:, 2:])
    again = linear_bad_dataset(B)
    np.testing.assert_array_equal(again.inputs, S.inputs)
    S.inputs[:3, 2:] = 0
    np.testing.assert_array_equal(linear_bad_dataset(S).inputs[:3], S.inputs[:3])


def test_linear_bad_dataset_same_moments():
    S = gen_linear(LinearSetupParams(m=1000, N=1000), 4)
    B = linear_bad_dataset(S)
    assert np.mean(np.sum(B.inputs[:, 2:] ** 2, axis=1)) == pytest.approx(32, rel=0.05)
    assert abs(np.mean(B.inputs[:, 2:])) < 0.01


def test_linear_conditions():
    assert linear_conditions(LinearSetupParams(m=100, N=10**6), 0.05, 0.05)
    d1 = linear_thresholds(100, 0.05, 0.05)[0]
    assert d1 == pytest.approx(2048 * math.log(6 * 100 / 0.05))
    assert not linear_conditions(LinearSetupParams(m=100, N=int(d1) - 1), 0.05, 0.05)
    assert linear_conditions(LinearSetupParams(m=100, N=min_linear_N(100, 0.05, 0.05)), 0.05, 0.05)
    with pytest.raises(InvalidInput):
        linear_conditions(LinearSetupParams(m=100, N=10**6), 0.05, 0.25)


def test_hypersphere_norms_and_labels():
    S = gen_hypersphere(200, 10, 0)
    norms = np.linalg.norm(S.inputs, axis=1)
    assert np.all(np.isclose(norms, 1.0, atol=1e-12) | np.isclose(norms, 1.1, atol=1e-12))
    np.testing.assert_array_equal(S.labels, (norms > 1.05).astype(int))
    assert S.labels.sum() == 100


def _angular_ok(S, trials_seed):
    dirs = S.inputs / np.linalg.norm(S.inputs, axis=1, keepdims=True)
    m, dim = dirs.shape
    return np.linalg.norm(dirs.mean(axis=0)) <= 4 / math.sqrt(m * dim) * math.sqrt(dim)


def test_hypersphere_angular_uniformity():
    # the mean of m unit vectors has norm about 1/sqrt(m); the threshold 4/sqrt(m)
    # is the per-coordinate 4/sqrt(m dim) bound summed over dim coordinates in l2
    ok = sum(_angular_ok(gen_hypersphere(400, 20, t), t) for t in range(50))
    assert ok >= 45
    ok_bad = sum(_angular_ok(hypersphere_bad_dataset(gen_hypersphere(400, 20, t)), t) for t in range(50))
    assert ok_bad >= 45


def test_hypersphere_bad_dataset():
    S = gen_hypersphere(50, 5, 3)
    B = hypersphere_bad_dataset(S)
    np.testing.assert_array_equal(B.labels, 1 - S.labels)
    np.testing.assert_allclose(np.linalg.norm(B.inputs, axis=1), np.where(S.labels == 0, 1.1, 1.0), rtol=1e-14)
    np.testing.assert_allclose(hypersphere_bad_dataset(B).inputs, S.inputs, rtol=1e-14, atol=1e-15)
    np.testing.assert_array_equal(hypersphere_bad_dataset(B).labels, S.labels)


def test_gen_exp():
    S = gen_exp(300, 400, 5)
    np.testing.assert_allclose(np.linalg.norm(S.inputs[:, :400], axis=1), math.sqrt(400) / 2, rtol=1e-13)
    assert np.mean(np.sum(S.inputs[:, 400:] ** 2, axis=1)) == pytest.approx(400, rel=0.05)
    assert abs(S.labels.sum()) <= 3 * math.sqrt(300)
    B = exp_bad_dataset(S)
    np.testing.assert_array_equal(B.inputs[:, 400:], S.inputs[:, 400:])
    np.testing.assert_array_equal(B.inputs[:, :400], -S.inputs[:, :400])
    np.testing.assert_array_equal(B.labels, -S.labels)
    np.testing.assert_array_equal(exp_bad_dataset(B).inputs, S.inputs)
    np.testing.assert_array_equal(exp_bad_dataset(B).labels, S.labels)


def test_exp_conditions():
    assert exp_conditions(40, 8000, 0.2, 0.2)
    assert not exp_conditions(40, 7000, 0.2, 0.2)
    with pytest.raises(InvalidInput):
        exp_conditions(40, 8000, 0.2, 0.3)


def test_corrupt_labels():
    S = LabeledDataset(np.zeros((2000, 1)), np.zeros(2000, dtype=int))
    np.testing.assert_array_equal(corrupt_labels(S, 0.0, 2, 0).labels, S.labels)
    flipped = corrupt_labels(S, 1.0, 2, 0).labels.mean()
    assert flipped == pytest.approx(0.5, abs=0.05)
    np.testing.assert_array_equal(corrupt_labels(S, 0.3, 10, 7).labels, corrupt_labels(S, 0.3, 10, 7).labels)
    with pytest.raises(InvalidInput):
        corrupt_labels(S, 1.5, 2, 0)


def test_generators_deterministic():
    a, b = gen_exp(10, 5, 9), gen_exp(10, 5, 9)
    np.testing.assert_array_equal(a.inputs, b.inputs)
    a, b = gen_hypersphere(10, 5, 9), gen_hypersphere(10, 5, 9)
    np.testing.assert_array_equal(a.inputs, b.inputs)


def _write_idx(tmp_path, img_bytes, lab_bytes, gz=False):
    ip, lp = tmp_path / "img", tmp_path / "lab"
    if gz:
        img_bytes, lab_bytes = gzip.compress(img_bytes), gzip.compress(lab_bytes)
    ip.write_bytes(img_bytes)
    lp.write_bytes(lab_bytes)
    return ip, lp


FIXTURE_IMG = bytes([0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2,
                     0, 255, 51, 102,
                     255, 0, 0, 204])
FIXTURE_LAB = bytes([0, 0, 8, 1, 0, 0, 0, 2, 7, 3])


@pytest.mark.parametrize("gz", [False, True])
def test_load_idx_fixture(tmp_path, gz):
    S = load_idx(*_write_idx(tmp_path, FIXTURE_IMG, FIXTURE_LAB, gz))
    np.testing.assert_array_equal(S.inputs, [[0, 1, 0.2, 0.4], [1, 0, 0, 0.8]])
    np.testing.assert_array_equal(S.labels, [7, 3])


def test_load_idx_errors(tmp_path):
    with pytest.raises(FormatError):
        load_idx(*_write_idx(tmp_path, b"", FIXTURE_LAB))
    with pytest.raises(FormatError, match="count"):
        load_idx(*_write_idx(tmp_path, FIXTURE_IMG, bytes([0, 0, 8, 1, 0, 0, 0, 1, 7])))
    with pytest.raises(FormatError, match="magic") as e:
        load_idx(*_write_idx(tmp_path, FIXTURE_LAB + bytes(20), FIXTURE_LAB))
    assert e.value.offset == 0
    with pytest.raises(FormatError, match="truncated") as e:
        load_idx(*_write_idx(tmp_path, FIXTURE_IMG[:-1], FIXTURE_LAB))
    assert e.value.offset == len(FIXTURE_IMG) - 1


def test_mnist_subset_split():
    tr, te = load_mnist_subset(2000, seed=0)
    assert len(tr) == 2000 and len(te) == 3000 and tr.dim == 784
    assert tr.inputs.min() >= 0 and tr.inputs.max() <= 1
    assert set(np.unique(tr.labels)) == set(range(10))
    tr2, _ = load_mnist_subset(2000, seed=0)
    np.testing.assert_array_equal(tr.labels, tr2.labels)


def test_csv_roundtrip(tmp_path):
    S = gen_hypersphere(7, 3, 1)
    S.inputs[0, 0] = 0.1 + 0.2
    write_csv(S, tmp_path / "d.csv")
    head = (tmp_path / "d.csv").read_text().splitlines()[0]
    assert head == "x0,x1,x2,label"
    B = read_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(B.inputs, S.inputs)
    np.testing.assert_array_equal(B.labels, S.labels)
