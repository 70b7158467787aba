"""Domain types for data, partitions, and lifted membership matrices.

Conventions used throughout the package:

* data matrices are ``(p, n)`` -- features in rows, samples in columns;
* cluster labels are 0-based integers internally (file formats read and
  written by the CLI are 1-based).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePartitionError, ValidationError

DEFAULT_LIFT_TOL = 1e-6
DEFAULT_SOLVER_TOL = 1e-4


def _as_matrix(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValidationError(f"expected a 2-d array, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class Dataset:
    """A ``(p, n)`` matrix of column-vector observations, optionally labeled."""

    x: np.ndarray
    true_labels: np.ndarray | None = None

    def __post_init__(self):
        x = _as_matrix(self.x)
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise ValidationError(f"empty data matrix of shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValidationError("data matrix contains non-finite entries")
        object.__setattr__(self, "x", x)
        if self.true_labels is not None:
            labels = np.asarray(self.true_labels, dtype=int)
            if labels.shape != (x.shape[1],):
                raise ValidationError(
                    f"true_labels has shape {labels.shape}, expected ({x.shape[1]},)"
                )
            k = int(labels.max()) + 1
            if labels.min() < 0 or k < 2:
                raise ValidationError("true labels must cover at least two clusters")
            if x.shape[1] < k:
                raise ValidationError("fewer samples than labeled clusters")
            object.__setattr__(self, "true_labels", labels)

    @property
    def p(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def truth(self) -> "Partition":
        if self.true_labels is None:
            raise ValidationError("dataset carries no ground-truth labels")
        return Partition(self.true_labels, int(self.true_labels.max()) + 1)


@dataclass(frozen=True)
class Partition:
    """An assignment of ``n`` items to ``k`` clusters (0-based labels)."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        if labels.ndim != 1 or labels.size == 0:
            raise ValidationError("labels must be a nonempty 1-d sequence")
        if self.k < 1:
            raise ValidationError("cluster count must be at least 1")
        if labels.min() < 0 or labels.max() >= self.k:
            raise ValidationError(
                f"labels must lie in [0, {self.k}), got range "
                f"[{labels.min()}, {labels.max()}]"
            )
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.labels.size

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def groups(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.labels == c) for c in range(self.k)]

    def require_nonempty(self) -> "Partition":
        sizes = self.sizes()
        if np.any(sizes == 0):
            empty = np.flatnonzero(sizes == 0).tolist()
            raise DegeneratePartitionError(f"empty cluster(s): {empty}")
        return self

    def assignment(self) -> "AssignmentMatrix":
        h = np.zeros((self.n, self.k))
        h[np.arange(self.n), self.labels] = 1.0
        return AssignmentMatrix(h)

    def relabeled(self, perm: np.ndarray) -> "Partition":
        """Apply a cluster-label permutation ``perm`` (new = perm[old])."""
        perm = np.asarray(perm, dtype=int)
        return Partition(perm[self.labels], self.k)


@dataclass(frozen=True)
class AssignmentMatrix:
    """Binary ``(n, k)`` matrix with exactly one 1 per row."""

    h: np.ndarray

    def __post_init__(self):
        h = _as_matrix(self.h)
        if not np.all((h == 0.0) | (h == 1.0)):
            raise ValidationError("assignment matrix entries must be 0 or 1")
        if not np.all(h.sum(axis=1) == 1.0):
            raise ValidationError("each assignment row must contain exactly one 1")
        object.__setattr__(self, "h", h)

    def to_partition(self) -> Partition:
        return Partition(np.argmax(self.h, axis=1), self.h.shape[1])

    def cluster_sizes(self) -> np.ndarray:
        return self.h.sum(axis=0).astype(int)


@dataclass(frozen=True)
class FeasibilityResiduals:
    """Worst violation per constraint family of the lifted feasible set."""

    min_entry: float
    min_eig: float
    trace_gap: float
    rowsum_gap: float

    @property
    def max_violation(self) -> float:
        return max(-self.min_entry, -self.min_eig, self.trace_gap, self.rowsum_gap, 0.0)

    def within(self, tol: float) -> bool:
        return self.max_violation <= tol


@dataclass(frozen=True)
class LiftedMembership:
    """``k`` symmetric ``(n, n)`` membership blocks; their sum is the classic
    single membership matrix."""

    blocks: np.ndarray
    feas_tol: float = DEFAULT_LIFT_TOL

    def __post_init__(self):
        blocks = np.asarray(self.blocks, dtype=float)
        if blocks.ndim != 3 or blocks.shape[1] != blocks.shape[2]:
            raise ValidationError(f"blocks must be (k, n, n), got {blocks.shape}")
        if not np.all(np.isfinite(blocks)):
            raise ValidationError("membership blocks contain non-finite entries")
        sym_gap = np.max(np.abs(blocks - blocks.transpose(0, 2, 1)))
        if sym_gap > 1e-8:
            raise ValidationError(f"membership blocks asymmetric by {sym_gap:.3e}")
        if self.feas_tol < 0:
            raise ValidationError("feas_tol must be nonnegative")
        object.__setattr__(self, "blocks", blocks)

    @property
    def k(self) -> int:
        return self.blocks.shape[0]

    @property
    def n(self) -> int:
        return self.blocks.shape[1]

    def membership_sum(self) -> np.ndarray:
        return self.blocks.sum(axis=0)

    def residuals(self) -> FeasibilityResiduals:
        return feasibility_residuals(self)

    def is_feasible(self) -> bool:
        return self.residuals().within(self.feas_tol)


def lift(partition: Partition) -> LiftedMembership:
    """Lift a hard partition to its block membership matrices.

    Block ``c`` holds ``1/|G_c|`` on the ``G_c x G_c`` block and 0 elsewhere.
    """
    partition.require_nonempty()
    n, k = partition.n, partition.k
    blocks = np.zeros((k, n, n))
    for c, idx in enumerate(partition.groups()):
        blocks[c][np.ix_(idx, idx)] = 1.0 / idx.size
    return LiftedMembership(blocks, feas_tol=DEFAULT_LIFT_TOL)


def single_lift(partition: Partition) -> np.ndarray:
    """The classic one-matrix lifting ``H B H^T`` (sum of all blocks)."""
    h = partition.assignment().h
    b = np.diag(1.0 / h.sum(axis=0))
    return h @ b @ h.T


def key_identity_check(a_list, partition: Partition) -> tuple[float, float]:
    """Evaluate both sides of the weighted block-sum identity.

    The left side sums similarity entries over within-cluster index pairs by
    explicit double loops; the right side is the matrix inner product against
    the lifted blocks. Intended for tests.
    """
    a_list = [np.asarray(a, dtype=float) for a in a_list]
    n = partition.n
    if len(a_list) != partition.k:
        raise ValidationError(
            f"expected {partition.k} similarity matrices, got {len(a_list)}"
        )
    for a in a_list:
        if a.shape != (n, n):
            raise ValidationError(f"similarity matrix shape {a.shape} != ({n}, {n})")
    partition.require_nonempty()

    lhs = 0.0
    for c, idx in enumerate(partition.groups()):
        acc = 0.0
        for i in idx:
            for j in idx:
                acc += a_list[c][i, j]
        lhs += acc / idx.size

    z = lift(partition)
    rhs = float(sum(np.vdot(a, zk) for a, zk in zip(a_list, z.blocks)))
    return lhs, rhs


def feasibility_residuals(z) -> FeasibilityResiduals:
    """Worst violation of each constraint family for a (stacked) membership."""
    blocks = z.blocks if isinstance(z, LiftedMembership) else np.asarray(z, dtype=float)
    k = blocks.shape[0]
    n = blocks.shape[1]
    min_entry = float(blocks.min())
    sym = 0.5 * (blocks + blocks.transpose(0, 2, 1))
    min_eig = float(min(np.linalg.eigvalsh(sym[c]).min() for c in range(k)))
    trace_gap = float(abs(np.trace(sym, axis1=1, axis2=2).sum() - k))
    rowsum_gap = float(np.abs(sym.sum(axis=0) @ np.ones(n) - 1.0).max())
    return FeasibilityResiduals(min_entry, min_eig, trace_gap, rowsum_gap)
