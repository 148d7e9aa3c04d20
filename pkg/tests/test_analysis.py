from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import adjusted_rand_score

from attribex.analysis import (GroupSpec, RelevanceMatrix, adjusted_rand_index, canonical_labels,
                               default_blur, kmeans, knn_affinity, normalize_explanations, pool, spray)
from attribex.attribution import Explanation
from attribex.errors import ConfigError
from attribex.fixtures import planted_strategies


def random_partition(rng, n, parts):
    labels = rng.integers(0, parts, n)
    labels[:parts] = np.arange(parts)
    return [list(np.flatnonzero(labels == p)) for p in range(parts)]


def test_pool_degenerate_and_identity():
    R = np.random.default_rng(0).standard_normal((4, 3))
    total = pool(R, GroupSpec([[0, 1, 2]], [[0, 1, 2, 3]])).cells
    assert total.shape == (1, 1)
    assert total[0, 0] == float(sum(Fraction(float(v)) for v in R.ravel()))
    ident = pool(R, GroupSpec([[i] for i in range(3)], [[n] for n in range(4)])).cells
    assert np.array_equal(ident, R)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_pool_conservation_exact(seed):
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((100, 8)) * 10.0 ** rng.integers(-8, 8, (100, 8))
    spec = GroupSpec(random_partition(rng, 8, 3), random_partition(rng, 100, 4))
    assert pool(R, spec).conservation_defect(R) == 0.0


def test_pool_rejects_non_partitions():
    R = np.zeros((3, 2))
    for spec in (GroupSpec([[0]], [[0, 1, 2]]), GroupSpec([[0, 1], [1]], [[0, 1, 2]]),
                 GroupSpec([[0, 1]], [[0, 1], []]), GroupSpec([[0, 1]], [[0, 1, 2, 3]])):
        with pytest.raises(ConfigError):
            pool(R, spec)


def test_relevance_matrix_rows_match_sums():
    rng = np.random.default_rng(1)
    ex = [Explanation(rng.standard_normal((2, 2)), "x", 0) for _ in range(3)]
    M = RelevanceMatrix.from_explanations(ex)
    assert M.R.shape == (3, 4)
    for row, e in zip(M.R, ex):
        assert row.sum() == pytest.approx(e.sum_relevance, abs=1e-12)
    with pytest.raises(ConfigError):
        RelevanceMatrix(np.zeros(3))


def test_normalization_unit_or_zero():
    X = np.random.default_rng(2).standard_normal((5, 4, 4))
    X[2] = 0.0
    for blur in (None, 1.0):
        N = normalize_explanations(X, blur)
        norms = np.linalg.norm(N, axis=1)
        np.testing.assert_allclose(np.delete(norms, 2), 1.0, atol=1e-12)
        assert norms[2] == 0.0


def test_blur_only_on_grids():
    assert default_blur((8, 8)) == 1.0 and default_blur((1, 8, 8)) == 1.0
    assert default_blur((10,)) is None


def test_affinity_symmetric_non_negative():
    X = normalize_explanations(np.random.default_rng(3).standard_normal((30, 6)))
    W = knn_affinity(X, 5)
    assert np.array_equal(W, W.T) and np.all(W >= 0) and np.all(np.diag(W) == 0)
    assert np.all((W > 0).sum(axis=1) >= 5)


def test_identical_explanations_one_cluster():
    X = np.tile(np.random.default_rng(4).standard_normal((1, 6, 6)), (10, 1, 1))
    r = spray(X, k=3)
    assert np.all(r.labels == 0)
    assert np.all(r.embedding == r.embedding[0])


@pytest.mark.parametrize("seed", range(3))
def test_planted_strategies_recovered(seed):
    expl, labels = planted_strategies(seed)
    r = spray(expl, k=2, seed=seed)
    assert adjusted_rand_index(r.labels, labels) >= 0.95
    assert r.embedding.shape == (60, 2)
    assert set(r.labels.tolist()) <= {0, 1}
    assert np.array_equal(r.affinity, r.affinity.T) and np.all(r.affinity >= 0)


def test_order_equivariance():
    expl, _ = planted_strategies(5)
    perm = np.random.default_rng(6).permutation(len(expl))
    a = spray(expl, k=2).labels
    b = spray(expl[perm], k=2).labels
    assert adjusted_rand_index(a[perm], b) == 1.0


def test_spray_errors():
    X = np.zeros((3, 4))
    with pytest.raises(ConfigError):
        spray(X, k=4)
    with pytest.raises(ConfigError):
        spray(X, k=1)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=2, max_size=40), st.integers(0, 10_000))
def test_ari_matches_reference(a, seed):
    b = np.random.default_rng(seed).integers(0, 3, len(a))
    assert adjusted_rand_index(a, b) == pytest.approx(adjusted_rand_score(a, b), abs=1e-12)


def test_kmeans_separated_blobs():
    rng = np.random.default_rng(7)
    X = np.vstack([rng.normal(0, 0.1, (10, 2)), rng.normal(5, 0.1, (10, 2))])
    lab = kmeans(X, 2, seed=0)
    assert lab.tolist() == [0] * 10 + [1] * 10
    assert canonical_labels([3, 3, 1, 2, 1]).tolist() == [0, 0, 1, 2, 1]
