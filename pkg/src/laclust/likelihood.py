"""Likelihood kernels: cluster-specific similarity matrices, the profile
log-likelihood of a partition, the closed-form covariance update, its rank-one
soft-clustering reading, and the observed mixture log-likelihood.

The profile log-likelihood drops the ``n p log(2 pi)`` constant and the global
factor 1/2; every module in the package uses this one convention so that
values are comparable across iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CovarianceSingularityError, EmptySoftClusterError, NotRankOneError, ValidationError
from .model import Dataset, LiftedMembership, Partition, lift

PSD_FLOOR_SCALE = 1e-6
RANK_ONE_TOL = 1e-6
SOFT_MASS_TOL = 1e-8


def _data(x) -> np.ndarray:
    if isinstance(x, Dataset):
        return x.x
    return np.asarray(x, dtype=float)


def _sym_eig(sigma: np.ndarray):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValidationError(f"covariance must be square, got {sigma.shape}")
    if np.max(np.abs(sigma - sigma.T)) > 1e-8 * (1.0 + np.max(np.abs(sigma))):
        raise ValidationError("covariance matrix is not symmetric")
    return np.linalg.eigh(0.5 * (sigma + sigma.T))


def spd_factors(sigma: np.ndarray):
    """Eigendecomposition-backed inverse, inverse square root and log-det.

    Raises for singular or indefinite input instead of regularizing.
    """
    w, v = _sym_eig(sigma)
    if w.min() <= 0.0:
        raise CovarianceSingularityError(
            f"covariance not positive definite (min eigenvalue {w.min():.3e})"
        )
    inv = (v / w) @ v.T
    inv_sqrt = (v / np.sqrt(w)) @ v.T
    logdet = float(np.log(w).sum())
    return inv, inv_sqrt, logdet


def psd_floor(sigma: np.ndarray) -> np.ndarray:
    """Raise eigenvalues below a trace-relative floor; keeps degenerate
    estimates positive definite."""
    w, v = _sym_eig(sigma)
    p = sigma.shape[0]
    eps = PSD_FLOOR_SCALE * (np.trace(sigma) / p + 1e-12)
    w = np.maximum(w, eps)
    out = (v * w) @ v.T
    return 0.5 * (out + out.T)


@dataclass(frozen=True)
class GmmParams:
    """Per-cluster means and covariances, plus mixing weights for EM."""

    means: np.ndarray        # (k, p)
    covariances: np.ndarray  # (k, p, p)
    weights: np.ndarray | None = None

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        covs = np.asarray(self.covariances, dtype=float)
        if covs.ndim == 2:
            covs = covs[None, :, :]
        if covs.shape != (means.shape[0], means.shape[1], means.shape[1]):
            raise ValidationError(
                f"covariance stack {covs.shape} does not match means {means.shape}"
            )
        if np.max(np.abs(covs - covs.transpose(0, 2, 1))) > 1e-8:
            raise ValidationError("covariances must be symmetric")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariances", covs)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (means.shape[0],) or w.min() < 0 or abs(w.sum() - 1.0) > 1e-8:
                raise ValidationError("weights must be a probability vector over clusters")
            object.__setattr__(self, "weights", w)

    @property
    def k(self) -> int:
        return self.means.shape[0]

    @property
    def p(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric similarity matrix tied to one cluster covariance."""

    a: np.ndarray
    source_cov_id: int = 0

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError(f"similarity matrix must be square, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("similarity matrix contains non-finite entries")
        if np.max(np.abs(a - a.T)) > 1e-8 * (1.0 + np.max(np.abs(a))):
            raise ValidationError("similarity matrix is not symmetric")
        object.__setattr__(self, "a", 0.5 * (a + a.T))


def similarity_matrix(x, sigma, cov_id: int = 0) -> SimilarityMatrix:
    """Covariance-adjusted similarity: a constant log-det shift, minus half of
    the Mahalanobis self-alignments on rows/columns, plus the Mahalanobis Gram
    matrix of the data."""
    xm = _data(x)
    inv, inv_sqrt, logdet = spd_factors(sigma)
    y = inv_sqrt @ xm
    gram = y.T @ y
    v = np.diag(gram)
    a = -logdet - 0.5 * (v[:, None] + v[None, :]) + gram
    return SimilarityMatrix(0.5 * (a + a.T), cov_id)


def similarity_stack(x, sigmas) -> np.ndarray:
    """Stacked ``(k, n, n)`` similarity matrices, one per covariance."""
    xm = _data(x)
    sigmas = np.asarray(sigmas, dtype=float)
    if sigmas.ndim == 2:
        sigmas = sigmas[None, :, :]
    return np.stack(
        [similarity_matrix(xm, sigmas[c], cov_id=c).a for c in range(sigmas.shape[0])]
    )


def profile_loglik(x, partition: Partition, sigmas) -> float:
    """Partition/covariance profile log-likelihood (means maximized out)."""
    xm = _data(x)
    partition.require_nonempty()
    sigmas = np.asarray(sigmas, dtype=float)
    if sigmas.ndim == 2:
        sigmas = sigmas[None, :, :]
    if sigmas.shape[0] != partition.k:
        raise ValidationError(
            f"expected {partition.k} covariances, got {sigmas.shape[0]}"
        )
    total = 0.0
    for c, idx in enumerate(partition.groups()):
        inv, inv_sqrt, logdet = spd_factors(sigmas[c])
        y = inv_sqrt @ xm[:, idx]
        sq = np.einsum("ij,ij->j", y, y)
        s = y.sum(axis=1)
        total += -idx.size * logdet - sq.sum() + (s @ s) / idx.size
    return float(total)


def lifted_objective(a_stack: np.ndarray, blocks: np.ndarray) -> float:
    """Inner product of stacked similarity matrices with membership blocks."""
    return float(np.vdot(np.asarray(a_stack, dtype=float), np.asarray(blocks, dtype=float)))


def _cov_update_block(xm: np.ndarray, zk: np.ndarray) -> np.ndarray:
    mass = float(np.ones(zk.shape[0]) @ zk @ np.ones(zk.shape[0]))
    if mass <= SOFT_MASS_TOL:
        raise EmptySoftClusterError(-1, mass)
    r = zk.sum(axis=1)
    m = (xm * r) @ xm.T - (xm @ zk) @ xm.T
    m = 0.5 * (m + m.T) / mass
    return psd_floor(m)


def block_masses(z) -> np.ndarray:
    blocks = z.blocks if isinstance(z, LiftedMembership) else np.asarray(z, dtype=float)
    n = blocks.shape[1]
    ones = np.ones(n)
    return np.array([ones @ blocks[c] @ ones for c in range(blocks.shape[0])])


def covariance_update(x, z) -> np.ndarray:
    """Closed-form maximizer of the lifted objective over the covariances.

    For each block this is the soft mixed second moment normalized by the
    block mass, symmetrized and floored to positive definiteness.
    """
    xm = _data(x)
    blocks = z.blocks if isinstance(z, LiftedMembership) else np.asarray(z, dtype=float)
    out = np.empty((blocks.shape[0], xm.shape[0], xm.shape[0]))
    for c in range(blocks.shape[0]):
        try:
            out[c] = _cov_update_block(xm, blocks[c])
        except EmptySoftClusterError as err:
            raise EmptySoftClusterError(c, err.mass) from None
    return out


def soft_decomposition(x, z_k: np.ndarray, rank_tol: float = RANK_ONE_TOL):
    """Split a rank-one membership block into soft weights, their weighted
    mean, and the matching covariance estimate.

    Returns ``(weights, mean, covariance)`` with the block equal to
    ``w w^T / (w^T 1)``; the covariance is the soft within-cluster second
    moment around the weighted mean and equals the closed-form update up to
    floating point. Raises when the block is not numerically rank one.
    """
    xm = _data(x)
    z_k = np.asarray(z_k, dtype=float)
    w, v = np.linalg.eigh(0.5 * (z_k + z_k.T))
    lead = w[-1]
    if lead <= 0:
        raise NotRankOneError("membership block has no positive eigenvalue")
    rest = np.max(np.abs(w[:-1])) if w.size > 1 else 0.0
    if rest > rank_tol * lead:
        raise NotRankOneError(
            f"second eigenvalue {rest:.3e} exceeds {rank_tol:.1e} x leading {lead:.3e}"
        )
    a = np.sqrt(lead) * v[:, -1]
    s = a.sum()
    if s * s <= SOFT_MASS_TOL:
        raise EmptySoftClusterError(-1, s * s)
    weights = s * a
    n_k = weights.sum()
    mean = (xm @ weights) / n_k
    centered = xm - mean[:, None]
    cov = (centered * weights) @ centered.T / n_k
    return weights, mean, psd_floor(0.5 * (cov + cov.T))


def observed_loglik(x, params: GmmParams) -> float:
    """Observed-data mixture log-likelihood with log-sum-exp stabilization."""
    _, evidence = component_log_posteriors(x, params)
    return float(evidence.sum())


def component_log_posteriors(x, params: GmmParams):
    """Log posteriors ``log tau_{ik}`` (n, k) and per-point log evidence (n,)."""
    xm = _data(x)
    if params.weights is None:
        raise ValidationError("mixture weights are required")
    n = xm.shape[1]
    logp = np.empty((n, params.k))
    for c in range(params.k):
        _, inv_sqrt, logdet = spd_factors(params.covariances[c])
        y = inv_sqrt @ (xm - params.means[c][:, None])
        sq = np.einsum("ij,ij->j", y, y)
        logp[:, c] = (
            np.log(params.weights[c] + 1e-300)
            - 0.5 * (params.p * np.log(2.0 * np.pi) + logdet + sq)
        )
    top = logp.max(axis=1)
    evidence = top + np.log(np.exp(logp - top[:, None]).sum(axis=1))
    return logp - evidence[:, None], evidence
