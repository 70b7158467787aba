"""Comparator clustering methods: Lloyd's K-means with K-means++ seeding,
EM for heterogeneous Gaussian mixtures, the means-only reduced EM, Ward
agglomerative clustering, graph-Laplacian spectral clustering, and the
label-perturbation helper used in the initialization-robustness experiments.

All methods take data as a ``(p, n)`` matrix (samples in columns) and are
deterministic given their seed.
"""

from __future__ import annotations

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from .errors import ValidationError
from .likelihood import GmmParams, component_log_posteriors, psd_floor
from .model import Dataset, Partition


def _data(x) -> np.ndarray:
    if isinstance(x, Dataset):
        return x.x
    return np.asarray(x, dtype=float)


def _kmeanspp_centers(pts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """K-means++ seeding on row-vector points."""
    n = pts.shape[0]
    centers = np.empty((k, pts.shape[1]))
    first = rng.integers(n)
    centers[0] = pts[first]
    d2 = ((pts - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers[c] = pts[idx]
        d2 = np.minimum(d2, ((pts - centers[c]) ** 2).sum(axis=1))
    return centers


def lloyd_rows(
    pts: np.ndarray,
    k: int,
    seed: int = 0,
    n_restarts: int = 10,
    max_iters: int = 300,
) -> tuple[np.ndarray, float]:
    """Best-of-restarts Lloyd fixed point on row-vector points.

    Empty clusters are repaired by reseeding the empty center to the point
    farthest from its current center. Returns (labels, within-cluster SSQ).
    """
    pts = np.asarray(pts, dtype=float)
    n = pts.shape[0]
    if n < k:
        raise ValidationError(f"cannot form {k} clusters from {n} points")
    best_labels, best_obj = None, np.inf
    root = np.random.SeedSequence(seed)
    for child in root.spawn(max(1, n_restarts)):
        rng = np.random.Generator(np.random.PCG64(child))
        centers = _kmeanspp_centers(pts, k, rng)
        labels = np.zeros(n, dtype=int)
        for _ in range(max_iters):
            d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            labels_new = d2.argmin(axis=1)
            for c in range(k):
                mask = labels_new == c
                if not mask.any():
                    far = d2[np.arange(n), labels_new].argmax()
                    centers[c] = pts[far]
                    labels_new[far] = c
                    mask = labels_new == c
                centers[c] = pts[mask].mean(axis=0)
            if np.array_equal(labels_new, labels):
                break
            labels = labels_new
        d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        obj = float(d2[np.arange(n), labels].sum())
        if obj < best_obj - 1e-12 or best_labels is None:
            best_obj, best_labels = obj, labels.copy()
    return best_labels, best_obj


def kmeans(x, k: int, seed: int = 0, n_restarts: int = 10, max_iters: int = 300) -> Partition:
    """Lloyd's K-means on column-vector data with K-means++ restarts."""
    labels, _ = lloyd_rows(_data(x).T, k, seed=seed, n_restarts=n_restarts, max_iters=max_iters)
    return Partition(labels, k)


def _partition_params(xm: np.ndarray, partition: Partition) -> GmmParams:
    partition.require_nonempty()
    n = xm.shape[1]
    means, covs, weights = [], [], []
    for idx in partition.groups():
        pts = xm[:, idx]
        mu = pts.mean(axis=1)
        centered = pts - mu[:, None]
        covs.append(psd_floor(centered @ centered.T / idx.size))
        means.append(mu)
        weights.append(idx.size / n)
    return GmmParams(np.array(means), np.stack(covs), np.array(weights))


def em_gmm(
    x,
    k: int,
    init: Partition,
    max_iters: int = 200,
    tol: float = 1e-8,
) -> tuple[Partition, GmmParams, list[float]]:
    """EM for a heterogeneous Gaussian mixture, initialized from a hard
    partition. Returns argmax-posterior labels, the fitted parameters, and
    the observed log-likelihood trace."""
    xm = _data(x)
    if init.k != k or init.n != xm.shape[1]:
        raise ValidationError("initial partition does not match data / cluster count")
    params = _partition_params(xm, init)
    trace: list[float] = []
    log_tau = None
    for _ in range(max_iters):
        log_tau, evidence = component_log_posteriors(xm, params)
        trace.append(float(evidence.sum()))
        tau = np.exp(log_tau)
        mass = tau.sum(axis=0)
        mass = np.maximum(mass, 1e-12)
        means = (xm @ tau) / mass
        covs = np.empty((k, xm.shape[0], xm.shape[0]))
        for c in range(k):
            centered = xm - means[:, c][:, None]
            covs[c] = psd_floor((centered * tau[:, c]) @ centered.T / mass[c])
        params = GmmParams(means.T, covs, mass / xm.shape[1])
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) <= tol * (1.0 + abs(trace[-2])):
            break
    log_tau, evidence = component_log_posteriors(xm, params)
    trace.append(float(evidence.sum()))
    labels = log_tau.argmax(axis=1)
    return Partition(labels, k), params, trace


def mem(x, k: int, seed: int = 0, max_iters: int = 200, tol: float = 1e-8) -> Partition:
    """Reduced EM: identity covariances and equal weights held fixed, means
    updated; centers initialized at data points drawn uniformly without
    replacement."""
    xm = _data(x)
    n = xm.shape[1]
    rng = np.random.default_rng(seed)
    centers = xm[:, rng.choice(n, size=k, replace=False)].T  # (k, p)
    for _ in range(max_iters):
        d2 = ((xm.T[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        logit = -0.5 * d2
        top = logit.max(axis=1, keepdims=True)
        tau = np.exp(logit - top)
        tau /= tau.sum(axis=1, keepdims=True)
        mass = np.maximum(tau.sum(axis=0), 1e-12)
        new_centers = (xm @ tau / mass).T
        shift = np.abs(new_centers - centers).max()
        centers = new_centers
        if shift <= tol * (1.0 + np.abs(centers).max()):
            break
    d2 = ((xm.T[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return Partition(d2.argmin(axis=1), k)


def hierarchical(x, k: int, method: str = "ward") -> Partition:
    """Deterministic agglomerative clustering on Euclidean distances."""
    if method not in ("single", "complete", "average", "ward"):
        raise ValidationError(f"unsupported linkage '{method}'")
    xm = _data(x)
    if xm.shape[1] < k:
        raise ValidationError(f"cannot form {k} clusters from {xm.shape[1]} points")
    merges = linkage(xm.T, method=method)
    labels = fcluster(merges, k, criterion="maxclust") - 1
    return Partition(labels, k)


def spectral_clustering(x, k: int, seed: int = 0, n_restarts: int = 10) -> Partition:
    """Normalized-Laplacian spectral clustering with a Gaussian kernel whose
    bandwidth is the median pairwise distance."""
    xm = _data(x)
    n = xm.shape[1]
    if n < k:
        raise ValidationError(f"cannot form {k} clusters from {n} points")
    sq = np.einsum("ij,ij->j", xm, xm)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (xm.T @ xm), 0.0)
    off = d2[np.triu_indices(n, k=1)]
    bandwidth = np.sqrt(np.median(off)) if off.size else 1.0
    if bandwidth <= 0:
        bandwidth = 1.0
    w = np.exp(-d2 / (2.0 * bandwidth**2))
    deg = w.sum(axis=1) + 1e-12
    sym = w / np.sqrt(np.outer(deg, deg))
    _, vecs = np.linalg.eigh(0.5 * (sym + sym.T))
    emb = vecs[:, -k:]
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    emb = emb / np.maximum(norms, 1e-12)
    labels, _ = lloyd_rows(emb, k, seed=seed, n_restarts=n_restarts)
    return Partition(labels, k)


def perturb_labels(partition: Partition, alpha: float, k: int, seed: int = 0) -> Partition:
    """Redraw the labels of a uniformly chosen ``floor(alpha * n)`` subset
    uniformly over the clusters."""
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError("perturbation fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    labels = partition.labels.copy()
    m = int(np.floor(alpha * partition.n))
    if m > 0:
        idx = rng.choice(partition.n, size=m, replace=False)
        labels[idx] = rng.integers(0, k, size=m)
    return Partition(labels, max(k, partition.k))


def merge_to_k(x, partition: Partition, k: int) -> Partition:
    """Map a partition with more clusters than ``k`` onto exactly ``k`` by
    repeatedly merging the pair of clusters with nearest centroids."""
    xm = _data(x)
    if partition.k < k:
        raise ValidationError("cannot merge upward: partition has fewer clusters")
    labels = partition.labels.copy()
    ids = sorted(set(labels.tolist()))
    while len(ids) > k:
        centroids = {c: xm[:, labels == c].mean(axis=1) for c in ids}
        best, pair = np.inf, None
        for i, a in enumerate(ids):
            for b in ids[i + 1 :]:
                d = float(((centroids[a] - centroids[b]) ** 2).sum())
                if d < best:
                    best, pair = d, (a, b)
        a, b = pair
        labels[labels == b] = a
        ids.remove(b)
    remap = {c: i for i, c in enumerate(sorted(set(labels.tolist())))}
    return Partition(np.array([remap[c] for c in labels]), k)
