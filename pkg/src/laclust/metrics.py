"""Evaluation quantities: permutation-matched mis-clustering error and the
covariance-aware separation diagnostics."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import CovarianceSingularityError, ValidationError
from .model import Partition


def _labels(p) -> np.ndarray:
    if isinstance(p, Partition):
        return p.labels
    return np.asarray(p, dtype=int)


def confusion_matrix(est, truth) -> np.ndarray:
    est, truth = _labels(est), _labels(truth)
    if est.shape != truth.shape:
        raise ValidationError("label sequences differ in length")
    k = int(max(est.max(), truth.max())) + 1
    cm = np.zeros((k, k), dtype=int)
    np.add.at(cm, (est, truth), 1)
    return cm


def misclustering_error(est, truth) -> float:
    """Fraction of disagreeing labels, minimized over label permutations.

    The optimal permutation comes from a linear assignment on the confusion
    matrix; unequal cluster counts are handled by zero padding.
    """
    est, truth = _labels(est), _labels(truth)
    cm = confusion_matrix(est, truth)
    rows, cols = linear_sum_assignment(-cm)
    matched = int(cm[rows, cols].sum())
    return (est.size - matched) / est.size


def misclustering_error_bruteforce(est, truth) -> float:
    """Exhaustive permutation minimization; test oracle for small k."""
    est, truth = _labels(est), _labels(truth)
    if est.shape != truth.shape:
        raise ValidationError("label sequences differ in length")
    k = int(max(est.max(), truth.max())) + 1
    if k > 8:
        raise ValidationError("brute force limited to k <= 8")
    best = est.size
    for perm in permutations(range(k)):
        mapped = np.asarray(perm)[est]
        best = min(best, int((mapped != truth).sum()))
    return best / est.size


@dataclass(frozen=True)
class SeparationDiagnostics:
    """Covariance-adjusted separation and covariance-closeness summaries."""

    delta_sq: float            # squared least covariance-adjusted separation
    pairwise_divergence: np.ndarray  # (k, k), zero diagonal
    max_op_ratio: float        # largest operator norm among whitened ratios
    min_harmonic_size: float   # least pairwise harmonic mean of cluster sizes
    min_cluster_size: int

    @property
    def delta(self) -> float:
        return float(np.sqrt(self.delta_sq))

    @property
    def min_divergence(self) -> float:
        k = self.pairwise_divergence.shape[0]
        if k < 2:
            return 0.0
        off = ~np.eye(k, dtype=bool)
        return float(self.pairwise_divergence[off].min())


def _sqrt_and_invsqrt(sigma: np.ndarray):
    w, v = np.linalg.eigh(0.5 * (sigma + sigma.T))
    if w.min() <= 0:
        raise CovarianceSingularityError(
            f"covariance not positive definite (min eigenvalue {w.min():.3e})"
        )
    return (v * np.sqrt(w)) @ v.T, (v / np.sqrt(w)) @ v.T


def separation_diagnostics(means, covariances, cluster_sizes) -> SeparationDiagnostics:
    """Compute the separation/closeness quantities from cluster parameters.

    The pairwise divergence for (k, l) averages ``lam - log(1 + lam)`` over
    the eigenvalues ``lam`` of the whitened covariance ratio minus identity,
    normalized by ``p * max |lam|``; identical covariances give 0 by
    convention.
    """
    means = np.atleast_2d(np.asarray(means, dtype=float))
    covs = np.asarray(covariances, dtype=float)
    if covs.ndim == 2:
        covs = covs[None, :, :]
    sizes = np.asarray(cluster_sizes, dtype=float)
    k, p = means.shape
    if covs.shape != (k, p, p) or sizes.shape != (k,):
        raise ValidationError("means, covariances and sizes are inconsistent")

    roots = [_sqrt_and_invsqrt(covs[c]) for c in range(k)]

    delta_sq = np.inf if k > 1 else 0.0
    divergence = np.zeros((k, k))
    max_ratio = 1.0 if k > 1 else 1.0
    for a in range(k):
        _, inv_sqrt_a = roots[a]
        inv_a = inv_sqrt_a @ inv_sqrt_a
        for b in range(k):
            if a == b:
                continue
            diff = inv_sqrt_a @ (means[a] - means[b])
            delta_sq = min(delta_sq, float(diff @ diff))
            sqrt_b, _ = roots[b]
            ratio = sqrt_b @ inv_a @ sqrt_b
            lam = np.linalg.eigvalsh(0.5 * (ratio + ratio.T)) - 1.0
            top = np.abs(lam).max()
            if top <= 1e-12:
                divergence[a, b] = 0.0
            else:
                divergence[a, b] = float((lam - np.log1p(lam)).sum() / (p * top))
            max_ratio = max(max_ratio, float(np.abs(lam + 1.0).max()))

    if k > 1:
        hs = np.inf
        for a in range(k):
            for b in range(a + 1, k):
                hs = min(hs, 2.0 * sizes[a] * sizes[b] / (sizes[a] + sizes[b]))
    else:
        hs = float(sizes[0])
    return SeparationDiagnostics(
        delta_sq=float(delta_sq) if np.isfinite(delta_sq) else 0.0,
        pairwise_divergence=divergence,
        max_op_ratio=max_ratio,
        min_harmonic_size=float(hs),
        min_cluster_size=int(sizes.min()),
    )
