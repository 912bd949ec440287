import numpy as np
import pytest

from oracles import brute_auc, brute_hamming, brute_ranking_loss
from uncertain_batch.exceptions import DimensionError, MetricUndefinedError
from uncertain_batch.metrics import evaluate, hamming_loss, macro_auc, ranking_loss


def _random_case(seed, n=20, q=5, ties=False):
    rng = np.random.default_rng(seed)
    S = rng.random((n, q))
    if ties:
        S = np.round(S, 1)
    return S, (rng.random((n, q)) < 0.4).astype(int)


def test_auc_examples():
    assert macro_auc([0.9, 0.1], [1, 0]) == 1.0
    assert macro_auc(np.full((6, 2), 0.3), [[1, 0], [0, 1], [1, 1], [0, 0], [1, 0], [0, 1]]) == 0.5
    with pytest.raises(MetricUndefinedError):
        macro_auc(np.random.default_rng(0).random((4, 2)), np.ones((4, 2)))


@pytest.mark.parametrize("seed", range(10))
def test_auc_matches_pair_counting(seed):
    S, Y = _random_case(seed, q=4, ties=seed % 2 == 1)
    assert abs(macro_auc(S, Y) - brute_auc(S.tolist(), Y.tolist())) <= 1e-12


def test_auc_complement():
    S, Y = _random_case(11, ties=True)
    assert abs(macro_auc(S, Y) + macro_auc(-S, Y) - 1.0) <= 1e-12


def test_ranking_loss_examples():
    assert ranking_loss([[0.9, 0.1, 0.2]], [[1, 0, 0]]) == 0.0
    assert ranking_loss([[0.5, 0.5, 0.5]], [[0, 1, 0]]) == 1.0
    with pytest.raises(MetricUndefinedError):
        ranking_loss([[0.2, 0.4]], [[1, 1]])


@pytest.mark.parametrize("seed", range(10))
def test_ranking_loss_matches_brute_force(seed):
    S, Y = _random_case(seed, ties=seed % 2 == 0)
    assert ranking_loss(S, Y) == pytest.approx(brute_ranking_loss(S.tolist(), Y.tolist()), abs=1e-15)


def test_hamming_examples_and_oracle():
    Y = np.array([[1, 0], [0, 1]])
    assert hamming_loss(Y.astype(float), Y) == 0.0
    assert hamming_loss(1.0 - Y, Y) == 1.0
    assert hamming_loss([[0.5]], [[1]]) == 0.0
    S, Y = _random_case(3)
    assert hamming_loss(S, Y) == brute_hamming(S.tolist(), Y.tolist())
    with pytest.raises(DimensionError):
        hamming_loss(S, Y[:, :2])


def test_invariances():
    S, Y = _random_case(5)
    base = (macro_auc(S, Y), ranking_loss(S, Y), hamming_loss(S, Y))
    T = np.exp(3 * S) - 4
    assert macro_auc(T, Y) == pytest.approx(base[0], abs=1e-15)
    assert ranking_loss(T, Y) == pytest.approx(base[1], abs=1e-15)
    assert hamming_loss(S**0.5 * 0.5**0.5, Y) == base[2]  # sqrt(s/2) >= 0.5 iff s >= 0.5
    perm = np.random.default_rng(1).permutation(len(S))
    assert macro_auc(S[perm], Y[perm]) == pytest.approx(base[0], abs=1e-15)
    assert ranking_loss(S[perm], Y[perm]) == pytest.approx(base[1], abs=1e-15)
    assert hamming_loss(S[perm], Y[perm]) == base[2]


def test_evaluate_reports_skips():
    S = np.array([[0.2, 0.9, 0.1], [0.7, 0.3, 0.4], [0.5, 0.1, 0.8]])
    Y = np.array([[1, 1, 1], [0, 1, 1], [0, 0, 1]])
    r = evaluate(S, Y)
    assert r.skipped_labels == 1  # third label has no negatives
    assert r.skipped_instances == 1  # first row has no irrelevant labels
    assert 0.0 <= r.macro_auc <= 1.0 and 0.0 <= r.ranking_loss <= 1.0
    assert np.isnan(evaluate(S, np.ones((3, 3))).macro_auc)
