"""Shared test utilities: planted instances and the exhaustive partition
oracle for the lifted objective."""

import numpy as np

from laclust.likelihood import similarity_stack
from laclust.model import Partition


def planted_instance(n, k, p, sep, seed, cond=1.0):
    """Well-separated mixture with per-cluster axis-inflated covariances.

    Returns (x, labels, covariances)."""
    rng = np.random.default_rng(seed)
    sizes = [n // k] * (k - 1) + [n - (n // k) * (k - 1)]
    labels = np.repeat(np.arange(k), sizes)
    means = sep * np.eye(k, p)
    covs = np.stack(
        [
            np.eye(p) + (cond - 1.0) * np.outer(np.eye(p)[(c + 1) % p], np.eye(p)[(c + 1) % p])
            for c in range(k)
        ]
    )
    x = np.empty((p, n))
    roots = [np.linalg.cholesky(covs[c]) for c in range(k)]
    for i, lab in enumerate(labels):
        x[:, i] = means[lab] + roots[lab] @ rng.standard_normal(p)
    return x, labels, covs


def planted_similarity(n, k, p, sep, seed, cond=1.0):
    x, labels, covs = planted_instance(n, k, p, sep, seed, cond)
    return similarity_stack(x, covs), x, labels, covs


def random_partition(n, k, rng):
    """Uniform random labels with every cluster nonempty."""
    while True:
        labels = rng.integers(0, k, size=n)
        if np.unique(labels).size == k:
            return Partition(labels, k)


def partition_objective(a_stack, labels):
    """Weighted within-cluster similarity sum for integer labels."""
    total = 0.0
    for c in range(a_stack.shape[0]):
        idx = np.flatnonzero(labels == c)
        if idx.size == 0:
            continue
        sub = a_stack[c][np.ix_(idx, idx)]
        total += sub.sum() / idx.size
    return float(total)


def exhaustive_best_partition(a_stack):
    """Maximum of the weighted within-cluster objective over all assignments
    of [n] into k labeled, nonempty clusters. Exponential; tests only."""
    k, n = a_stack.shape[0], a_stack.shape[1]
    if n > 12 or k > 3:
        raise ValueError("exhaustive oracle limited to n <= 12, k <= 3")
    masks = np.arange(1 << n, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(n)) & 1).astype(float)
    quad = [np.einsum("si,ij,sj->s", bits, a_stack[c], bits) for c in range(k)]
    sizes = bits.sum(axis=1)
    full = (1 << n) - 1

    best = -np.inf
    if k == 2:
        for s1 in range(1, full):
            s2 = full ^ s1
            val = quad[0][s1] / sizes[s1] + quad[1][s2] / sizes[s2]
            if val > best:
                best = val
        return best
    for s1 in range(1, full):
        comp = full ^ s1
        if comp == 0:
            continue
        base = quad[0][s1] / sizes[s1]
        # enumerate nonempty proper subsets s2 of comp
        s2 = comp
        while s2:
            s3 = comp ^ s2
            if s3:
                val = base + quad[1][s2] / sizes[s2] + quad[2][s3] / sizes[s3]
                if val > best:
                    best = val
            s2 = (s2 - 1) & comp
    return best
