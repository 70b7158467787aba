"""Synthetic Gaussian-mixture generators for the benchmark families, plus the
bounded-interval log transform used for reflectance-style tabular data.

Families
--------
``common-cond``
    One shared covariance ``I + L e_1 e_1^T`` (condition number ``L + 1``),
    centers on scaled standard-basis vertices. The scale is chosen so the
    covariance-adjusted separation equals ``sep`` exactly for every ``L``.
``hetero-simplex``
    Center distance ``sep``; cluster ``c`` has covariance
    ``I + (L - 1) diag(e_{c+1})`` (cyclic), condition number ``L``.
``em-adversarial``
    One-dimensional three-component mixture with centers
    ``(gamma, -gamma, 10 gamma)`` and unit variances.
``random-cov``
    Sparse center differences at distance ``sep``; covariances drawn from
    random rotations of diagonal spectra ``1 + beta Z 1(Z > 0)``.
``sample-complexity``
    The hetero-simplex family with center distance ``sep * sqrt(log n)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import Dataset

FAMILIES = (
    "common-cond",
    "hetero-simplex",
    "em-adversarial",
    "random-cov",
    "sample-complexity",
)


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    n: int
    p: int
    k: int
    sep: float | None = None    # center separation (lambda / d / gamma by family)
    cond: float | None = None   # covariance condition parameter L
    beta: float | None = None   # spectrum spread for random-cov
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown family '{self.family}'")
        if self.n < self.k or self.k < 2 or self.p < 1:
            raise ValidationError("need n >= k >= 2 and p >= 1")
        if self.family == "em-adversarial":
            if self.p != 1 or self.k != 3:
                raise ValidationError("em-adversarial family is 1-dimensional with 3 clusters")
            if self.sep is None or self.sep <= 0:
                raise ValidationError("em-adversarial needs a positive separation gamma")
        else:
            if self.sep is None or self.sep < 0:
                raise ValidationError(f"family '{self.family}' needs a nonnegative separation")
        if self.family in ("common-cond", "hetero-simplex", "sample-complexity"):
            if self.cond is None or self.cond <= 1:
                raise ValidationError(f"family '{self.family}' needs condition parameter > 1")
            if self.p < self.k:
                raise ValidationError(f"family '{self.family}' needs p >= k")
        if self.family == "random-cov":
            if self.beta is None or self.beta < 0:
                raise ValidationError("random-cov needs beta >= 0")
            if self.p < self.k:
                raise ValidationError("random-cov needs p >= k")


def _simplex_means(k: int, p: int, scale: float) -> np.ndarray:
    means = np.zeros((k, p))
    for c in range(k):
        means[c, c] = scale
    return means


def family_params(spec: GeneratorSpec) -> tuple[np.ndarray, np.ndarray]:
    """True (means, covariances) for a generator spec. Deterministic given
    the spec (random-cov derives its draws from the seed)."""
    k, p = spec.k, spec.p
    if spec.family == "common-cond":
        big = float(spec.cond)
        # adjusted separation equals sep for every conditioning level
        scale = spec.sep / np.sqrt(1.0 + 1.0 / (1.0 + big))
        means = _simplex_means(k, p, scale)
        cov = np.eye(p)
        cov[0, 0] = 1.0 + big
        covs = np.broadcast_to(cov, (k, p, p)).copy()
        return means, covs
    if spec.family in ("hetero-simplex", "sample-complexity"):
        dist = spec.sep
        if spec.family == "sample-complexity":
            dist = spec.sep * np.sqrt(np.log(spec.n))
        means = _simplex_means(k, p, dist / np.sqrt(2.0))
        covs = np.empty((k, p, p))
        for c in range(k):
            cov = np.eye(p)
            cov[(c + 1) % k, (c + 1) % k] = float(spec.cond)
            covs[c] = cov
        return means, covs
    if spec.family == "em-adversarial":
        g = float(spec.sep)
        means = np.array([[g], [-g], [10.0 * g]])
        covs = np.broadcast_to(np.eye(1), (3, 1, 1)).copy()
        return means, covs
    if spec.family == "random-cov":
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0xC0F]))
        means = _simplex_means(k, p, spec.sep / np.sqrt(2.0))
        covs = np.empty((k, p, p))
        for c in range(k):
            z = rng.standard_normal(p)
            lam = 1.0 + spec.beta * np.where(z > 0, z, 0.0)
            gauss = rng.standard_normal((p, p))
            q, r = np.linalg.qr(gauss)
            q = q * np.sign(np.diag(r))
            covs[c] = (q * lam) @ q.T
        return means, covs
    raise ValidationError(f"unknown family '{spec.family}'")


def balanced_sizes(n: int, k: int) -> np.ndarray:
    """Cluster sizes as equal as possible; the remainder round-robins."""
    sizes = np.full(k, n // k, dtype=int)
    sizes[: n % k] += 1
    return sizes


def generate(spec: GeneratorSpec) -> Dataset:
    """Draw a labeled dataset from the spec's mixture with balanced sizes."""
    means, covs = family_params(spec)
    sizes = balanced_sizes(spec.n, spec.k)
    labels = np.repeat(np.arange(spec.k), sizes)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0xDA7A]))
    roots = [np.linalg.cholesky(covs[c]) for c in range(spec.k)]
    x = np.empty((spec.p, spec.n))
    for c in range(spec.k):
        idx = np.flatnonzero(labels == c)
        noise = rng.standard_normal((spec.p, idx.size))
        x[:, idx] = means[c][:, None] + roots[c] @ noise
    return Dataset(x, labels)


def landsat_transform(x) -> np.ndarray:
    """Entrywise ``log(1/x - 1)`` for data in (0, 1), inputs clamped to
    ``[1e-6, 1 - 1e-6]``; monotone decreasing on its domain."""
    xm = np.asarray(x, dtype=float)
    clipped = np.clip(xm, 1e-6, 1.0 - 1e-6)
    return np.log(1.0 / clipped - 1.0)
