"""High-dimensional and large-sample variants: F-test attribute screening,
discriminant-subspace reduction with automatic target-dimension selection,
and cluster-then-assign subsampling."""

from __future__ import annotations

import numpy as np
from scipy.special import betainc

from .baselines import hierarchical
from .errors import LaclustError, ValidationError
from .likelihood import psd_floor, spd_factors
from .model import Dataset, Partition
from .pipeline import IlasdpConfig, ilasdp


def _data(x) -> np.ndarray:
    if isinstance(x, Dataset):
        return x.x
    return np.asarray(x, dtype=float)


def f_sf(f: float, d1: int, d2: int) -> float:
    """Survival function of the F(d1, d2) distribution via the regularized
    incomplete beta function."""
    if not np.isfinite(f):
        return 0.0
    if f <= 0:
        return 1.0
    return float(betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)))


def anova_pvalues(x, partition: Partition) -> tuple[np.ndarray, np.ndarray]:
    """One-way ANOVA p-value per attribute under the partition's groups.

    Returns (p_values, flags); flagged attributes are the degenerate ones:
    constant attributes get p = 1, zero within-group variance with varying
    group means gets p = 0 (infinite F statistic).
    """
    xm = _data(x)
    partition.require_nonempty()
    p, n = xm.shape
    k = partition.k
    if k < 2 or n <= k:
        raise ValidationError("need at least two groups and n > k for the F-test")
    groups = partition.groups()
    grand = xm.mean(axis=1)
    between = np.zeros(p)
    within = np.zeros(p)
    for idx in groups:
        pts = xm[:, idx]
        mu = pts.mean(axis=1)
        between += idx.size * (mu - grand) ** 2
        within += ((pts - mu[:, None]) ** 2).sum(axis=1)
    d1, d2 = k - 1, n - k
    pvals = np.empty(p)
    flags = np.zeros(p, dtype=bool)
    scale = n * (1.0 + grand**2)
    for i in range(p):
        if within[i] <= 1e-18 * scale[i]:
            flags[i] = True
            pvals[i] = 1.0 if between[i] <= 1e-18 * scale[i] else 0.0
        else:
            f = (between[i] / d1) / (within[i] / d2)
            pvals[i] = f_sf(f, d1, d2)
    return pvals, flags


def ftest_screen(
    x,
    k: int,
    p0: int,
    alpha: float = 0.7,
    cutoff_ratio: float = 1e10,
    seed: int = 0,
    partition: Partition | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Keep the ``p0`` attributes with smallest ANOVA p-values under a
    hierarchical-clustering partition; when the p-value spread shows no clear
    cutoff, each remaining attribute is additionally kept with probability
    ``alpha``.

    Returns (sorted selected attribute indices, all p-values).
    """
    xm = _data(x)
    if not 0 <= alpha <= 1:
        raise ValidationError("alpha must lie in [0, 1]")
    if p0 > xm.shape[0] or p0 < 1:
        raise ValidationError(f"p0 must lie in [1, {xm.shape[0]}]")
    part = partition if partition is not None else hierarchical(xm, k)
    pvals, _ = anova_pvalues(xm, part)
    order = np.argsort(pvals, kind="stable")
    selected = set(order[:p0].tolist())
    pmin = max(pvals.min(), 1e-300)
    if pvals.max() / pmin < cutoff_ratio:
        rng = np.random.default_rng(seed)
        for i in order[p0:]:
            if rng.random() < alpha:
                selected.add(int(i))
    return np.array(sorted(selected)), pvals


def lda_reduce(
    x, k: int, ktilde_range=None
) -> tuple[np.ndarray, int, np.ndarray]:
    """Discriminant reduction: sweep the trial cluster count, keep the one
    whose pooled-whitened least pairwise mean separation is largest (largest
    trial count on ties), and project onto the leading discriminant
    directions.

    Returns (transformed data of shape (ktilde - 1, n), chosen ktilde,
    projection directions). The directions are orthonormal in the
    pooled-within-covariance inner product.
    """
    xm = _data(x)
    p, n = xm.shape
    if ktilde_range is None:
        ktilde_range = range(k, min(p, n - 1) + 1)
    ktilde_range = sorted(set(int(v) for v in ktilde_range))
    if not ktilde_range or ktilde_range[0] < k or ktilde_range[-1] > p:
        raise ValidationError(f"trial cluster counts must lie in [{k}, {p}]")

    best_kt, best_snr = None, -np.inf
    for kt in ktilde_range:
        part = hierarchical(xm, kt)
        snr = _pooled_snr(xm, part)
        if snr >= best_snr:
            best_snr, best_kt = snr, kt

    part = hierarchical(xm, best_kt)
    within, mus, sizes = _pooled_scatter(xm, part)
    _, inv_sqrt, _ = spd_factors(psd_floor(within))
    grand = xm.mean(axis=1)
    centered = mus - grand[None, :]
    between = (centered.T * (sizes / n)) @ centered
    m = inv_sqrt @ between @ inv_sqrt
    _, vecs = np.linalg.eigh(0.5 * (m + m.T))
    q = best_kt - 1
    directions = inv_sqrt @ vecs[:, -q:][:, ::-1]
    return directions.T @ xm, best_kt, directions


def _pooled_scatter(xm: np.ndarray, part: Partition):
    mus = []
    sizes = []
    within = np.zeros((xm.shape[0], xm.shape[0]))
    for idx in part.groups():
        pts = xm[:, idx]
        mu = pts.mean(axis=1)
        mus.append(mu)
        sizes.append(idx.size)
        centered = pts - mu[:, None]
        within += centered @ centered.T
    return within / xm.shape[1], np.array(mus), np.array(sizes, dtype=float)


def _pooled_snr(xm: np.ndarray, part: Partition) -> float:
    within, mus, _ = _pooled_scatter(xm, part)
    _, inv_sqrt, _ = spd_factors(psd_floor(within))
    best = np.inf
    for a in range(len(mus)):
        for b in range(a + 1, len(mus)):
            d = inv_sqrt @ (mus[a] - mus[b])
            best = min(best, float(np.sqrt(d @ d)))
    return best if np.isfinite(best) else 0.0


def sketch_and_lift(
    x,
    k: int,
    gamma: float,
    cfg: IlasdpConfig | None = None,
    seed: int = 0,
    max_attempts: int = 5,
) -> Partition:
    """Cluster a Bernoulli(``gamma``) subsample with the alternating pipeline,
    then assign every held-out point to the cluster minimizing the
    log-det-penalized Mahalanobis score; ties fall back to a uniform draw.

    With ``gamma = 1`` this is exactly the full pipeline run.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValidationError("subsample factor must lie in (0, 1]")
    cfg = cfg or IlasdpConfig()
    xm = _data(x)
    n = xm.shape[1]

    last_err = None
    for attempt in range(max_attempts):
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt]))
        if gamma >= 1.0:
            taken = np.ones(n, dtype=bool)
        else:
            taken = rng.random(n) < gamma
        if taken.sum() < max(k + 1, int(0.01 * n)):
            last_err = LaclustError(f"subsample of {int(taken.sum())} points is too small")
            continue
        sketch = xm[:, taken]
        try:
            init = hierarchical(sketch, k)
            sketch_part, _, _ = ilasdp(sketch, init, k, cfg)
            sketch_part.require_nonempty()
        except LaclustError as err:
            last_err = err
            continue

        if taken.all():
            return sketch_part

        labels = np.empty(n, dtype=int)
        labels[taken] = sketch_part.labels
        scores = np.empty((k, n))
        for c, idx in enumerate(sketch_part.groups()):
            pts = sketch[:, idx]
            mu = pts.mean(axis=1)
            centered = pts - mu[:, None]
            cov = psd_floor(centered @ centered.T / idx.size)
            _, inv_sqrt, logdet = spd_factors(cov)
            y = inv_sqrt @ (xm - mu[:, None])
            scores[c] = logdet + np.einsum("ij,ij->j", y, y)
        held = np.flatnonzero(~taken)
        if k == 1:
            labels[held] = 0
            return Partition(labels, k)
        order = np.argsort(scores[:, held], axis=0)
        for pos, i in enumerate(held):
            best, second = order[0, pos], order[1, pos]
            if scores[best, i] < scores[second, i]:
                labels[i] = best
            else:
                labels[i] = rng.integers(k)
        return Partition(labels, k)

    raise LaclustError(f"subsampled clustering failed after {max_attempts} attempts") from last_err
