import numpy as np
import pytest

from laclust.baselines import (
    em_gmm,
    hierarchical,
    kmeans,
    mem,
    merge_to_k,
    perturb_labels,
    spectral_clustering,
)
from laclust.metrics import misclustering_error
from laclust.model import Partition

from helpers import planted_instance


def blobs_1d(sep=30.0, per=10, seed=0):
    rng = np.random.default_rng(seed)
    x = np.concatenate([rng.normal(-sep, 1, per), rng.normal(sep, 1, per)])[None, :]
    labels = np.repeat([0, 1], per)
    return x, labels


# ------------------------------------------------------------------- kmeans


def test_kmeans_singletons_when_k_equals_n():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 5)) * 10
    part = kmeans(x, 5, seed=1)
    assert sorted(part.labels.tolist()) == [0, 1, 2, 3, 4]


def test_kmeans_two_blobs():
    x, labels = blobs_1d()
    part = kmeans(x, 2, seed=3)
    assert misclustering_error(part, Partition(labels, 2)) == 0.0


def test_kmeans_duplicate_points_single_cluster():
    x = np.full((2, 6), 1.5)
    part = kmeans(x, 1, seed=0)
    assert part.k == 1
    assert np.all(part.labels == 0)


def test_kmeans_deterministic():
    x, _ = blobs_1d(seed=4)
    a = kmeans(x, 2, seed=9)
    b = kmeans(x, 2, seed=9)
    np.testing.assert_array_equal(a.labels, b.labels)


# ----------------------------------------------------------------------- em


def test_em_truth_init_is_fixed_point():
    x, labels, _ = planted_instance(40, 2, 2, 12.0, seed=1)
    truth = Partition(labels, 2)
    part, params, trace = em_gmm(x, 2, truth)
    assert misclustering_error(part, truth) == 0.0
    diffs = np.diff(trace)
    assert np.all(diffs >= -1e-8 * (1.0 + np.abs(trace[:-1])))


def test_em_single_component_closed_form():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(2, 30))
    part, params, _ = em_gmm(x, 1, Partition(np.zeros(30, dtype=int), 1))
    np.testing.assert_allclose(params.means[0], x.mean(axis=1), atol=1e-8)
    centered = x - x.mean(axis=1, keepdims=True)
    np.testing.assert_allclose(params.covariances[0], centered @ centered.T / 30, atol=1e-6)


def test_em_loglik_trace_non_decreasing_random_inits():
    rng = np.random.default_rng(3)
    x, labels, _ = planted_instance(30, 3, 2, 3.0, seed=5)
    for trial in range(5):
        init = rng.integers(0, 3, size=30)
        while np.unique(init).size < 3:
            init = rng.integers(0, 3, size=30)
        _, _, trace = em_gmm(x, 3, Partition(init, 3))
        diffs = np.diff(trace)
        assert np.all(diffs >= -1e-8 * (1.0 + np.abs(trace[:-1])))


# ---------------------------------------------------------------------- mem


def test_mem_single_cluster_mean():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(1, 20))
    part = mem(x, 1, seed=0)
    assert np.all(part.labels == 0)


def test_mem_recovers_separated_blobs():
    x, labels = blobs_1d(sep=40.0, seed=6)
    errs = [misclustering_error(mem(x, 2, seed=s), Partition(labels, 2)) for s in range(8)]
    assert min(errs) == 0.0
    assert np.mean(errs) <= 0.3


# ------------------------------------------------------------------------ hc


def test_hierarchical_two_blobs_and_singletons():
    x, labels = blobs_1d(seed=7)
    part = hierarchical(x, 2)
    assert misclustering_error(part, Partition(labels, 2)) == 0.0
    tiny = np.array([[0.0, 10.0, 20.0]])
    assert sorted(hierarchical(tiny, 3).labels.tolist()) == [0, 1, 2]


def test_hierarchical_deterministic():
    x, _ = blobs_1d(seed=8)
    np.testing.assert_array_equal(hierarchical(x, 2).labels, hierarchical(x, 2).labels)


def test_merge_to_k_collapses_nearest_centroids():
    x = np.array([[0.0, 0.1, 5.0, 5.1, 20.0]])
    part = Partition(np.array([0, 1, 2, 2, 3]), 4)
    merged = merge_to_k(x, part, 3)
    assert merged.k == 3
    assert merged.labels[0] == merged.labels[1]  # nearest pair got merged
    assert merged.labels[4] not in (merged.labels[0], merged.labels[2])


# ------------------------------------------------------------------ spectral


def test_spectral_two_blobs():
    x, labels = blobs_1d(seed=9)
    part = spectral_clustering(x, 2, seed=0)
    assert misclustering_error(part, Partition(labels, 2)) == 0.0


def test_spectral_scale_invariance_of_labels():
    x, _, _ = planted_instance(24, 2, 2, 9.0, seed=10)
    a = spectral_clustering(x, 2, seed=5)
    b = spectral_clustering(3.0 * x, 2, seed=5)
    assert misclustering_error(a, b) == 0.0


def test_spectral_single_cluster():
    rng = np.random.default_rng(11)
    part = spectral_clustering(rng.normal(size=(2, 12)), 1, seed=0)
    assert np.all(part.labels == 0)


# ------------------------------------------------------------------- perturb


def test_perturb_identity_and_full():
    part = Partition(np.array([0, 1, 2, 0, 1, 2]), 3)
    same = perturb_labels(part, 0.0, 3, seed=1)
    np.testing.assert_array_equal(same.labels, part.labels)
    full = perturb_labels(part, 1.0, 3, seed=1)
    assert full.n == part.n


def test_perturb_expected_agreement():
    n, k = 10000, 4
    part = Partition(np.zeros(n, dtype=int), 1)
    alpha = 0.6
    agree = []
    for seed in range(5):
        out = perturb_labels(part, alpha, k, seed=seed)
        agree.append(np.mean(out.labels == part.labels))
    expected = 1.0 - alpha * (1.0 - 1.0 / k)
    assert np.mean(agree) == pytest.approx(expected, abs=0.02)


def test_perturb_full_alpha_uniform():
    n, k = 12000, 3
    part = Partition(np.zeros(n, dtype=int), 1)
    out = perturb_labels(part, 1.0, k, seed=2)
    counts = np.bincount(out.labels, minlength=k) / n
    np.testing.assert_allclose(counts, np.full(k, 1 / k), atol=0.02)


def test_label_permutation_covariance_of_em():
    x, labels, _ = planted_instance(24, 3, 2, 10.0, seed=12)
    init = Partition(labels, 3)
    base, _, _ = em_gmm(x, 3, init)
    perm = np.array([1, 2, 0])
    permuted, _, _ = em_gmm(x, 3, init.relabeled(perm))
    assert misclustering_error(base, permuted) == 0.0
