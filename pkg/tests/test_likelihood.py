import numpy as np
import pytest

from laclust.errors import CovarianceSingularityError, EmptySoftClusterError, NotRankOneError
from laclust.likelihood import (
    GmmParams,
    covariance_update,
    lifted_objective,
    observed_loglik,
    profile_loglik,
    psd_floor,
    similarity_matrix,
    similarity_stack,
    soft_decomposition,
)
from laclust.model import Partition, lift

from helpers import random_partition


def random_spd(p, rng, scale=1.0):
    a = rng.normal(size=(p, p))
    return scale * (a @ a.T + p * np.eye(p))


# ---------------------------------------------------------------- similarity


def test_similarity_trivial_point():
    a = similarity_matrix(np.array([[0.0]]), np.array([[1.0]])).a
    np.testing.assert_allclose(a, [[0.0]])


def test_similarity_identity_covariance_gives_half_sq_distances():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(3, 6))
    a = similarity_matrix(x, np.eye(3)).a
    for i in range(6):
        for j in range(6):
            expected = -0.5 * np.sum((x[:, i] - x[:, j]) ** 2)
            assert a[i, j] == pytest.approx(expected, abs=1e-12)


def test_similarity_hand_value():
    a = similarity_matrix(np.array([[0.0, 2.0]]), np.array([[2.0]])).a
    assert a[0, 1] == pytest.approx(-(np.log(2.0) + 1.0), abs=1e-12)


def test_similarity_rejects_indefinite():
    with pytest.raises(CovarianceSingularityError):
        similarity_matrix(np.zeros((2, 2)), np.diag([1.0, -1.0]))
    with pytest.raises(CovarianceSingularityError):
        similarity_matrix(np.zeros((2, 2)), np.zeros((2, 2)))


# ------------------------------------------------------------ profile loglik


def test_profile_two_points_hand_value():
    x = np.array([[1.0, -1.0]])
    val = profile_loglik(x, Partition(np.array([0, 0]), 1), np.array([[[1.0]]]))
    assert val == pytest.approx(-2.0, abs=1e-12)


def test_profile_permutation_invariance():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(2, 8))
    part = Partition(np.array([0, 0, 1, 1, 2, 2, 2, 0]), 3)
    sigmas = np.stack([random_spd(2, rng) for _ in range(3)])
    base = profile_loglik(x, part, sigmas)
    perm = np.array([2, 0, 1])
    swapped = profile_loglik(x, part.relabeled(perm), sigmas[np.argsort(perm)])
    assert swapped == pytest.approx(base, rel=1e-12)


def test_profile_equals_lifted_objective():
    rng = np.random.default_rng(2)
    for _ in range(10):
        n, k, p = 9, 3, 2
        x = rng.normal(size=(p, n))
        part = random_partition(n, k, rng)
        sigmas = np.stack([random_spd(p, rng) for _ in range(k)])
        a = similarity_stack(x, sigmas)
        direct = profile_loglik(x, part, sigmas)
        lifted = lifted_objective(a, lift(part).blocks)
        assert lifted == pytest.approx(direct, rel=1e-8, abs=1e-8)


def test_isotropic_collapse_constant_offset():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(2, 10))
    sigma_sq = 2.0
    gram = x.T @ x
    offsets = []
    for _ in range(8):
        part = random_partition(10, 2, rng)
        sigmas = np.stack([sigma_sq * np.eye(2)] * 2)
        profile = profile_loglik(x, part, sigmas)
        kmeans_obj = lifted_objective(gram[None], lift(part).membership_sum()[None])
        offsets.append(profile - kmeans_obj / sigma_sq)
    assert np.ptp(offsets) <= 1e-8 * (1.0 + np.abs(offsets).max())


# --------------------------------------------------------- covariance update


def test_covariance_update_hand_value():
    x = np.array([[1.0, -1.0]])
    z = lift(Partition(np.array([0, 0]), 1))
    np.testing.assert_allclose(covariance_update(x, z)[0], [[1.0]], atol=1e-12)


def test_covariance_update_on_lift_is_within_cluster_covariance():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(3, 12))
    part = random_partition(12, 3, rng)
    covs = covariance_update(x, lift(part))
    for c, idx in enumerate(part.groups()):
        pts = x[:, idx]
        centered = pts - pts.mean(axis=1, keepdims=True)
        np.testing.assert_allclose(covs[c], centered @ centered.T / idx.size, atol=1e-10)


def _feasible_soft_blocks(n, k, rng, n_mix=3):
    blocks = np.zeros((k, n, n))
    for _ in range(n_mix):
        w = rng.random()
        blocks += w * lift(random_partition(n, k, rng)).blocks
    total = np.trace(blocks.sum(axis=0))
    return blocks * (k / total)


def test_covariance_update_zeroes_gradient():
    rng = np.random.default_rng(5)
    n, p, k = 6, 2, 2
    x = rng.normal(size=(p, n))
    blocks = _feasible_soft_blocks(n, k, rng)
    covs = covariance_update(x, blocks)
    step = 1e-5
    for c in range(k):
        zk = blocks[c]
        mass = zk.sum()
        omega = np.linalg.inv(covs[c])

        def objective(om):
            return lifted_objective(
                similarity_matrix(x, np.linalg.inv(om)).a[None], zk[None]
            )

        grad = np.zeros((p, p))
        for i in range(p):
            for j in range(i, p):
                basis = np.zeros((p, p))
                basis[i, j] = basis[j, i] = 1.0
                val = (objective(omega + step * basis) - objective(omega - step * basis)) / (2 * step)
                grad[i, j] = grad[j, i] = val
        scale = mass * np.linalg.norm(covs[c]) + 1e-12
        assert np.linalg.norm(grad) / scale <= 1e-4


def test_covariance_update_empty_mass_raises():
    x = np.zeros((1, 3))
    blocks = np.zeros((2, 3, 3))
    blocks[0] = np.ones((3, 3)) / 3.0
    with pytest.raises(EmptySoftClusterError) as err:
        covariance_update(x, blocks)
    assert err.value.block == 1


def test_covariance_update_optimality_against_alternatives():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(1, 10)) * 2.0
    part = random_partition(10, 2, rng)
    best = covariance_update(x, lift(part))
    ref = profile_loglik(x, part, best)
    # 1-d closed form: per-cluster sample variance is the unique maximizer
    for _ in range(25):
        trial = np.stack([[[rng.uniform(0.05, 8.0)]], [[rng.uniform(0.05, 8.0)]]])
        assert ref >= profile_loglik(x, part, trial) - 1e-10
    grid = np.linspace(0.2, 4.0, 60)
    vals = [
        profile_loglik(x, part, np.stack([[[s1]], [[best[1, 0, 0]]]]))
        for s1 in grid
    ]
    assert ref >= max(vals) - 1e-9


# --------------------------------------------------------- soft decomposition


def test_soft_decomposition_lift_block():
    x = np.array([[0.0, 1.0, 2.0, 10.0]])
    part = Partition(np.array([0, 0, 0, 1]), 2)
    weights, mean, cov = soft_decomposition(x, lift(part).blocks[0])
    np.testing.assert_allclose(weights, [1.0, 1.0, 1.0, 0.0], atol=1e-10)
    assert mean[0] == pytest.approx(1.0)
    np.testing.assert_allclose(cov, covariance_update(x, lift(part))[0], atol=1e-12)


def test_soft_decomposition_recovers_weights():
    w = np.array([2.0, 1.0, 1.0])
    z = np.outer(w, w) / w.sum()
    x = np.array([[0.0, 1.0, 3.0]])
    weights, _, _ = soft_decomposition(x, z)
    np.testing.assert_allclose(weights, w, atol=1e-10)
    np.testing.assert_allclose(z, np.outer(weights, weights) / weights.sum(), atol=1e-12)


def test_soft_decomposition_matches_covariance_update():
    rng = np.random.default_rng(7)
    for _ in range(10):
        n, p = 8, 2
        w = rng.random(n) + 0.1
        z = np.outer(w, w) / w.sum()
        x = rng.normal(size=(p, n))
        _, _, cov = soft_decomposition(x, z)
        np.testing.assert_allclose(cov, covariance_update(x, z[None])[0], atol=1e-10)


def test_soft_decomposition_rejects_higher_rank():
    z = np.diag([0.6, 0.4])
    with pytest.raises(NotRankOneError):
        soft_decomposition(np.zeros((1, 2)), z)


# ------------------------------------------------------------ observed loglik


def test_observed_standard_normal_point():
    params = GmmParams(np.array([[0.0]]), np.array([[[1.0]]]), np.array([1.0]))
    assert observed_loglik(np.array([[0.0]]), params) == pytest.approx(
        -0.5 * np.log(2 * np.pi)
    )


def test_observed_component_permutation_invariance():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(2, 6))
    means = rng.normal(size=(3, 2))
    covs = np.stack([random_spd(2, rng) for _ in range(3)])
    weights = np.array([0.5, 0.3, 0.2])
    base = observed_loglik(x, GmmParams(means, covs, weights))
    perm = [2, 0, 1]
    shuffled = observed_loglik(x, GmmParams(means[perm], covs[perm], weights[perm]))
    assert shuffled == pytest.approx(base, rel=1e-12)


def test_observed_matches_naive_sum():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(2, 5))
    means = rng.normal(size=(2, 2))
    covs = np.stack([random_spd(2, rng) for _ in range(2)])
    weights = np.array([0.4, 0.6])
    naive = 0.0
    for i in range(5):
        dens = 0.0
        for c in range(2):
            diff = x[:, i] - means[c]
            inv = np.linalg.inv(covs[c])
            det = np.linalg.det(covs[c])
            dens += (
                weights[c]
                * np.exp(-0.5 * diff @ inv @ diff)
                / np.sqrt((2 * np.pi) ** 2 * det)
            )
        naive += np.log(dens)
    val = observed_loglik(x, GmmParams(means, covs, weights))
    assert val == pytest.approx(naive, abs=1e-12)


# -------------------------------------------------------------------- floors


def test_psd_floor_repairs_degenerate_matrix():
    sigma = np.array([[1.0, 1.0], [1.0, 1.0]])  # rank one
    floored = psd_floor(sigma)
    w = np.linalg.eigvalsh(floored)
    assert w.min() > 0
    assert w.max() == pytest.approx(2.0, rel=1e-6)


def test_covariance_update_output_psd_on_random_feasible():
    rng = np.random.default_rng(10)
    for _ in range(10):
        x = rng.normal(size=(3, 9))
        blocks = _feasible_soft_blocks(9, 3, rng)
        covs = covariance_update(x, blocks)
        for c in range(3):
            np.testing.assert_allclose(covs[c], covs[c].T, atol=1e-12)
            assert np.linalg.eigvalsh(covs[c]).min() > 0
