"""Turn relaxed membership matrices into hard partitions."""

from __future__ import annotations

import numpy as np

from .baselines import lloyd_rows
from .errors import ValidationError
from .model import LiftedMembership, Partition


def spectral_round(z_sum: np.ndarray, k: int, seed: int = 0, n_restarts: int = 10) -> Partition:
    """Cluster the rows of the top-k eigenvector matrix of the summed
    membership matrix; best of seeded K-means restarts."""
    z_sum = np.asarray(z_sum, dtype=float)
    if z_sum.ndim != 2 or z_sum.shape[0] != z_sum.shape[1]:
        raise ValidationError(f"membership sum must be square, got {z_sum.shape}")
    if np.max(np.abs(z_sum - z_sum.T)) > 1e-6 * (1.0 + np.max(np.abs(z_sum))):
        raise ValidationError("membership sum is not symmetric")
    _, vecs = np.linalg.eigh(0.5 * (z_sum + z_sum.T))
    emb = vecs[:, -k:]
    labels, _ = lloyd_rows(emb, k, seed=seed, n_restarts=n_restarts)
    return Partition(labels, k)


def blockmass_round(z: LiftedMembership) -> Partition:
    """Assign each point to the block carrying the largest row mass;
    ties break to the smallest block index."""
    masses = z.blocks.sum(axis=2)  # (k, n) row masses per block
    return Partition(np.argmax(masses, axis=0), z.k)
