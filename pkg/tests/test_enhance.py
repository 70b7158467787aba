import numpy as np
import pytest

from laclust.baselines import hierarchical
from laclust.enhance import anova_pvalues, f_sf, ftest_screen, lda_reduce, sketch_and_lift
from laclust.errors import ValidationError
from laclust.metrics import misclustering_error
from laclust.model import Partition
from laclust.pipeline import IlasdpConfig, ilasdp

from helpers import planted_instance


def test_f_sf_matches_scipy():
    from scipy.stats import f as fdist

    for fval, d1, d2 in [(0.5, 3, 10), (2.0, 1, 198), (7.3, 2, 40)]:
        assert f_sf(fval, d1, d2) == pytest.approx(fdist.sf(fval, d1, d2), rel=1e-10)
    assert f_sf(0.0, 2, 5) == 1.0
    assert f_sf(np.inf, 2, 5) == 0.0


def test_anova_flags_constant_attribute():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(3, 20))
    x[1] = 4.2  # constant row
    part = Partition(np.repeat([0, 1], 10), 2)
    pvals, flags = anova_pvalues(x, part)
    assert flags[1]
    assert pvals[1] == 1.0


def test_anova_zero_within_variance_gives_zero_pvalue():
    x = np.vstack([np.repeat([0.0, 10.0], 5)[None, :], np.random.default_rng(1).normal(size=(1, 10))])
    part = Partition(np.repeat([0, 1], 5), 2)
    pvals, flags = anova_pvalues(x, part)
    assert flags[0]
    assert pvals[0] == 0.0


def test_ftest_screen_selects_signal_attribute():
    hits = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n, p = 200, 8
        labels = np.repeat([0, 1], n // 2)
        x = rng.standard_normal((p, n))
        x[3] += 10.0 * labels  # group means 0 vs 10 on attribute 3
        selected, _ = ftest_screen(x, 2, p0=2, alpha=0.0, seed=seed)
        hits += 3 in selected
    assert hits == 20


def test_ftest_screen_exact_p0_with_clear_cutoff():
    rng = np.random.default_rng(5)
    n, p = 120, 6
    labels = np.repeat([0, 1], n // 2)
    x = rng.standard_normal((p, n))
    x[0] += 8.0 * labels
    x[1] += 8.0 * (1 - labels)
    selected, pvals = ftest_screen(x, 2, p0=2, alpha=0.0, seed=0)
    assert len(selected) == 2
    assert pvals.min() >= 0.0 and pvals.max() <= 1.0


def test_ftest_screen_no_cutoff_keeps_extra_attributes():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((10, 80))  # pure noise: p-values all of one scale
    selected, pvals = ftest_screen(x, 2, p0=2, alpha=1.0, cutoff_ratio=1e10, seed=0)
    assert len(selected) == 10  # alpha=1 keeps everything when no clear cutoff
    assert pvals.max() / pvals.min() < 1e10


def test_pvalues_monotone_in_f():
    d1, d2 = 3, 50
    fs = [0.1, 0.5, 1.0, 2.0, 5.0, 20.0]
    ps = [f_sf(v, d1, d2) for v in fs]
    assert all(a > b for a, b in zip(ps, ps[1:]))


def test_lda_reduce_preserves_separation_in_low_dim_structure():
    rng = np.random.default_rng(7)
    n, k = 120, 3
    labels = np.repeat(np.arange(k), n // k)
    means2d = np.array([[0.0, 0.0], [8.0, 0.0], [0.0, 8.0]])
    signal = means2d[labels].T + rng.standard_normal((2, n))
    noise = 0.05 * rng.standard_normal((6, n))
    x = np.vstack([signal, noise])

    from laclust.metrics import separation_diagnostics
    from laclust.pipeline import init_cov_from_partition

    def min_sep(data):
        part = Partition(labels, k)
        covs = init_cov_from_partition(data, part)
        mus = np.stack([data[:, idx].mean(axis=1) for idx in part.groups()])
        return separation_diagnostics(mus, covs, part.sizes()).delta

    reduced, kt, dirs = lda_reduce(x, k, ktilde_range=[k])
    assert reduced.shape == (k - 1, n)
    assert min_sep(reduced) >= 0.95 * min_sep(x)


def test_lda_reduce_q_rows_and_w_orthonormal():
    x, labels, _ = planted_instance(60, 3, 5, 8.0, seed=8, cond=3.0)
    reduced, kt, dirs = lda_reduce(x, 3, ktilde_range=[3, 4, 5])
    assert reduced.shape[0] == kt - 1
    part = hierarchical(x, kt)
    # pooled within-cluster covariance at the chosen trial count
    from laclust.enhance import _pooled_scatter

    within, _, _ = _pooled_scatter(x, part)
    gram = dirs.T @ within @ dirs
    np.testing.assert_allclose(gram, np.eye(kt - 1), atol=1e-6)


def test_lda_reduce_validates_range():
    x, _, _ = planted_instance(20, 2, 3, 5.0, seed=9)
    with pytest.raises(ValidationError):
        lda_reduce(x, 2, ktilde_range=[4])


def test_sketch_gamma_one_equals_full_run():
    x, labels, _ = planted_instance(40, 2, 2, 9.0, seed=10, cond=4.0)
    cfg = IlasdpConfig(seed=3, solver="bm")
    full, _, _ = ilasdp(x, hierarchical(x, 2), 2, cfg)
    sketch = sketch_and_lift(x, 2, 1.0, cfg, seed=99)
    np.testing.assert_array_equal(sketch.labels, full.labels)


def test_sketch_partial_recovers_separated_instance():
    x, labels, _ = planted_instance(120, 2, 2, 10.0, seed=11, cond=4.0)
    part = sketch_and_lift(x, 2, 0.4, IlasdpConfig(seed=4, solver="bm"), seed=5)
    assert misclustering_error(part, Partition(labels, 2)) <= 0.05


def test_lift_rule_equal_covariances_is_nearest_centroid():
    # two tight clusters with equal shapes: held-out points go to the nearer
    # centroid because the log-det terms cancel
    rng = np.random.default_rng(12)
    left = rng.normal(-8, 0.5, (1, 30))
    right = rng.normal(8, 0.5, (1, 30))
    x = np.concatenate([left, right], axis=1)
    part = sketch_and_lift(x, 2, 0.5, IlasdpConfig(seed=5, solver="bm"), seed=6)
    truth = Partition(np.repeat([0, 1], 30), 2)
    assert misclustering_error(part, truth) == 0.0


def test_sketch_invalid_gamma():
    x, _, _ = planted_instance(20, 2, 2, 5.0, seed=13)
    with pytest.raises(ValidationError):
        sketch_and_lift(x, 2, 0.0, IlasdpConfig(), seed=0)
