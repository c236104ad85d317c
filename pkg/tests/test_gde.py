from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genlab import gde
from genlab.gde import (PredictionTable, cace, cace_exact, confidence_counts, confidence_profile,
                        deviation_check_exact, disagreement_rate, ece, ete_edr_exact, expected_disagreement,
                        expected_test_error, gde_report, gde_scatter, write_scatter_csv)
from genlab.linalg import InvalidInput, make_rng

HAND = PredictionTable([[0, 1, 2, 2, 0], [0, 1, 1, 2, 1], [2, 1, 1, 0, 0]], 3, [0, 1, 1, 2, 0])


def random_table(seed, M=20, n=200, K=None):
    rng = make_rng(seed)
    K = K or int(rng.integers(2, 6))
    y = rng.integers(0, K, n)
    # models agree with the label with a per-example probability, so the table is not pure noise
    p = rng.random(n)
    preds = np.where(rng.random((M, n)) < p, y, rng.integers(0, K, (M, n)))
    return PredictionTable(preds, K, y)


def pair_average(table, distinct=False):
    M = table.n_models
    tot, cnt = Fraction(0), 0
    for i in range(M):
        for j in range(M):
            if distinct and i == j:
                continue
            tot += Fraction(int(np.sum(table.preds[i] != table.preds[j])), table.n_examples)
            cnt += 1
    return tot / cnt


def test_disagreement_and_error_hand_table():
    assert disagreement_rate(HAND, 0, 0) == 0.0
    assert disagreement_rate(HAND, 0, 1) == pytest.approx(2 / 5)
    assert disagreement_rate(HAND, 0, 2) == pytest.approx(3 / 5)
    assert disagreement_rate(HAND, 1, 2) == pytest.approx(3 / 5)
    assert [gde.test_error(HAND, i) for i in range(3)] == pytest.approx([1 / 5, 1 / 5, 2 / 5])
    comp = PredictionTable([[0, 1, 0], [1, 0, 1]], 2, [0, 1, 0])
    assert disagreement_rate(comp, 0, 1) == 1.0
    assert gde.test_error(comp, 0) == 0.0 and gde.test_error(comp, 1) == 1.0


def test_confidence_profile_hand_table():
    prof = confidence_profile(HAND)
    expected = np.array([[2, 0, 1], [0, 3, 0], [0, 2, 1], [1, 0, 2], [2, 1, 0]]) / 3
    np.testing.assert_allclose(prof, expected)
    one = PredictionTable([[1, 0]], 2)
    np.testing.assert_array_equal(confidence_profile(one), [[0, 1], [1, 0]])


def test_edr_fixture_from_level_sets():
    # ten models; h0 = 0.1 on half the examples, 0.2 on the other half
    preds = np.ones((10, 2), dtype=int)
    preds[0, 0] = 0
    preds[:2, 1] = 0
    t = PredictionTable(preds, 2, [0, 0])
    _, edr = ete_edr_exact(confidence_counts(t), t.labels, 10)
    assert edr == Fraction(1, 4)
    assert expected_disagreement(confidence_profile(t)) == pytest.approx(0.25, abs=1e-15)


def test_edr_one_hot_and_distinct_pairs():
    t = PredictionTable([[0, 1, 1]] * 4, 2, [0, 1, 0])
    assert expected_disagreement(confidence_profile(t)) == 0.0
    prof = confidence_profile(HAND)
    assert expected_disagreement(prof, distinct_pairs=True, n_models=3) == pytest.approx(
        float(pair_average(HAND, distinct=True)), rel=1e-14)
    with pytest.raises(InvalidInput):
        expected_disagreement(prof, distinct_pairs=True)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 8), st.integers(1, 30), st.integers(2, 5))
def test_edr_equals_ordered_pair_average(seed, M, n, K):
    t = random_table(seed, M, n, K)
    _, edr = ete_edr_exact(confidence_counts(t), t.labels, M)
    assert edr == pair_average(t)
    assert expected_disagreement(confidence_profile(t)) == pytest.approx(float(edr), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 8), st.integers(1, 30))
def test_ete_equals_mean_test_error(seed, M, n):
    t = random_table(seed, M, n)
    ete, _ = ete_edr_exact(confidence_counts(t), t.labels, M)
    errs = sum(Fraction(int(np.sum(t.preds[i] != t.labels)), n) for i in range(M)) / M
    assert ete == errs
    assert expected_test_error(confidence_profile(t), t.labels) == pytest.approx(float(ete), abs=1e-12)


def test_calibrated_binary_level_set():
    # q = 0.3 level set with the label matching class 0 on exactly 30% of the examples
    M, n = 10, 10
    preds = np.ones((M, n), dtype=int)
    preds[:3, :] = 0
    y = np.array([0] * 3 + [1] * 7)
    t = PredictionTable(preds, 2, y)
    ete, edr = ete_edr_exact(confidence_counts(t), y, M)
    assert ete == edr == Fraction(2 * 3 * 7, 100)
    assert cace_exact(confidence_counts(t), y, M) == 0


def test_cace_hand_fixture():
    # 2 classes, 4 examples, confidences on class 0: 1, 0.5, 0.5, 0
    prof = np.array([[1.0, 0.0], [0.5, 0.5], [0.5, 0.5], [0.0, 1.0]])
    y = np.array([0, 0, 1, 0])
    val, rows = cace(prof, y, bins=10)
    # bin [0, .1): pairs (ex0,c1) hit 0, (ex3,c0) hit 1 -> acc 1/2, conf 0, weight 2/4
    # bin [.5, .6): four pairs, two hits -> acc 1/2 = conf
    # bin [.9, 1]: (ex0,c0) hit 1, (ex3,c1) hit 0 -> acc 1/2, conf 1, weight 2/4
    assert val == pytest.approx(0.5 * 0.5 + 0.5 * 0.5)
    assert [r.count for r in rows] == [2, 0, 0, 0, 0, 4, 0, 0, 0, 2]
    one, _ = cace(prof, y, bins=1)
    # one bin holding all 8 pairs: acc 4/8, conf 1/2 -> 0
    assert one == 0.0
    with pytest.raises(InvalidInput):
        cace(prof, None)
    with pytest.raises(InvalidInput):
        cace(prof, y, bins=0)


def test_cace_one_bin_degenerate():
    prof = np.array([[0.8, 0.2], [0.6, 0.4]])
    y = np.array([1, 1])
    val, _ = cace(prof, y, bins=1)
    # four pairs, two hits, mean confidence 1/2 -> 0
    assert val == 0.0
    prof2 = np.array([[0.8, 0.0, 0.2], [0.6, 0.0, 0.4]])
    val2, _ = cace(prof2, y * 0, bins=1)
    # six pairs, two hits, mean confidence 1/3 -> 0
    assert val2 == pytest.approx(0.0, abs=1e-15)
    val3, _ = cace(prof2, np.array([2, 2]), bins=1)
    assert val3 == pytest.approx(0.0, abs=1e-15)
    val4, _ = cace(np.array([[0.7, 0.3]]), np.array([1]), bins=1)
    assert val4 == 0.0
    val5, _ = cace(np.array([[0.7, 0.3]]), np.array([1]), bins=2)
    # bin [0, .5): conf .3 acc 1 ; bin [.5, 1]: conf .7 acc 0 -> (.7 + .7)
    assert val5 == pytest.approx(1.4)


def test_ece():
    prof = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert ece(prof, np.array([0, 1])) == 0.0
    prof = np.array([[0.75, 0.25], [0.75, 0.25], [0.25, 0.75], [0.5, 0.5]])
    y = np.array([0, 1, 1, 1])
    # top-class confidences .75 (hit), .75 (miss), .75 (hit), .5 (argmax picks class 0: miss)
    assert ece(prof, y) == pytest.approx(0.75 * abs(2 / 3 - 0.75) + 0.25 * 0.5)


@pytest.mark.parametrize("seed", range(100))
def test_deviation_theorem_exact(seed):
    holds, gap, c = deviation_check_exact(random_table(seed))
    assert holds and gap <= c


def test_report_and_bins():
    t = random_table(3, M=6, n=50)
    rep = gde_report(t)
    assert rep.exact_bins is False and 0 <= rep.cace <= t.n_classes and 0 <= rep.ece <= 1
    ex = gde_report(t, bins=None)
    assert ex.exact_bins and ex.deviation_verdict
    assert len(rep.disagreements) == 15 and len(rep.test_errors) == 6
    assert '"deviation_verdict"' in rep.to_json()
    assert rep.ete == pytest.approx(np.mean(rep.test_errors))


def test_table_validation_and_csv(tmp_path):
    with pytest.raises(InvalidInput):
        PredictionTable([[0, 3]], 3)
    with pytest.raises(InvalidInput):
        PredictionTable([[0, 1]], 2, [0])
    path = tmp_path / "t.csv"
    HAND.write_csv(path)
    back = PredictionTable.read_csv(path, 3)
    np.testing.assert_array_equal(back.preds, HAND.preds)
    np.testing.assert_array_equal(back.labels, HAND.labels)


def test_scatter(tmp_path):
    y = np.array([0, 1, 1, 0])
    p = np.array([0, 1, 0, 0])
    rows = gde_scatter([(p, p, y, "Same"), (p, 1 - p, y, "DiffInit")])
    assert (rows[0].disagreement, rows[0].test_error) == (0.0, 0.25)
    assert rows[1].disagreement == 1.0
    path = tmp_path / "s.csv"
    write_scatter_csv(rows, path)
    assert len(path.read_text().strip().splitlines()) == 3
