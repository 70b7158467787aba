"""The alternating-maximization driver: solve the membership SDP under the
current covariances, update the covariances in closed form, repeat until the
membership sum stabilizes, then round spectrally.

The recorded objective is the relaxed lifted objective evaluated at the
current (memberships, covariances) pair, which is the quantity the
alternation provably does not decrease. A safeguard keeps the previous
memberships whenever a (possibly inexact) solve would lower that objective,
in which case the run has reached a fixed point and stops.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySoftClusterError, ValidationError
from .likelihood import (
    SOFT_MASS_TOL,
    covariance_update,
    lifted_objective,
    profile_loglik,
    psd_floor,
    similarity_stack,
)
from .model import Dataset, LiftedMembership, Partition, lift
from .rounding import blockmass_round, spectral_round
from .sdp import SdpProblem, SolveReport, SolverOptions, solve_lasdp_admm, solve_lasdp_bm

MONO_TOL_SCALE = 1e-6
ADMM_MAX_N = 300


def _data(x) -> np.ndarray:
    if isinstance(x, Dataset):
        return x.x
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class IlasdpConfig:
    max_outer: int = 50
    rel_tol: float = 1e-2
    solver: str = "auto"  # auto | admm | bm
    rank_factor: int = 2
    seed: int = 0
    record_loglik: bool = False
    rounding: str = "spectral"  # spectral | blockmass
    n_restarts: int = 10
    solver_options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.max_outer < 1:
            raise ValidationError("max_outer must be at least 1")
        if not self.rel_tol > 0:
            raise ValidationError("rel_tol must be positive")
        if self.solver not in ("auto", "admm", "bm"):
            raise ValidationError(f"unknown solver '{self.solver}'")
        if self.rounding not in ("spectral", "blockmass"):
            raise ValidationError(f"unknown rounding '{self.rounding}'")


@dataclass
class IlasdpTrace:
    """Per-outer-iteration record: relaxed objective, relative membership
    change, and (optionally) the profile log-likelihood of the rounded
    iterate."""

    objective: list[float] = field(default_factory=list)
    rel_change: list[float] = field(default_factory=list)
    loglik: list[float] = field(default_factory=list)
    iterations: int = 0

    def monotone_violation(self, tol_scale: float = MONO_TOL_SCALE) -> float:
        """Largest decrease of the objective trace beyond tolerance
        (0 when the trace is monotone)."""
        worst = 0.0
        for prev, cur in zip(self.objective, self.objective[1:]):
            allowed = tol_scale * (1.0 + abs(prev))
            worst = max(worst, prev - cur - allowed)
        return worst

    def is_monotone(self, tol_scale: float = MONO_TOL_SCALE) -> bool:
        return self.monotone_violation(tol_scale) <= 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["iteration", "objective", "rel_change"]
            if self.loglik:
                header.append("loglik")
            writer.writerow(header)
            for i, obj in enumerate(self.objective):
                row = [i + 1, repr(obj), repr(self.rel_change[i])]
                if self.loglik:
                    row.append(repr(self.loglik[i]))
                writer.writerow(row)


def init_cov_from_partition(x, partition: Partition) -> np.ndarray:
    """Within-cluster sample covariances (populations divisor), floored."""
    xm = _data(x)
    partition.require_nonempty()
    covs = np.empty((partition.k, xm.shape[0], xm.shape[0]))
    for c, idx in enumerate(partition.groups()):
        pts = xm[:, idx]
        centered = pts - pts.mean(axis=1, keepdims=True)
        covs[c] = psd_floor(centered @ centered.T / idx.size)
    return covs


def _choose_solver(cfg: IlasdpConfig, n: int) -> str:
    if cfg.solver != "auto":
        return cfg.solver
    return "admm" if n <= ADMM_MAX_N else "bm"


def _solve(a_stack, cfg: IlasdpConfig, n: int, z_warm, bm_seed: int):
    problem = SdpProblem(tuple(a_stack), options=cfg.solver_options)
    if _choose_solver(cfg, n) == "admm":
        return solve_lasdp_admm(problem, z0=z_warm)
    return solve_lasdp_bm(problem, s=cfg.rank_factor, seed=bm_seed)


def _round(z: LiftedMembership, k: int, cfg: IlasdpConfig) -> Partition:
    if cfg.rounding == "blockmass":
        return blockmass_round(z)
    return spectral_round(z.membership_sum(), k, seed=cfg.seed, n_restarts=cfg.n_restarts)


def oracle_lasdp(
    x, sigmas, k: int, cfg: IlasdpConfig | None = None
) -> tuple[Partition, LiftedMembership, SolveReport]:
    """One membership solve under known covariances, then rounding."""
    cfg = cfg or IlasdpConfig()
    xm = _data(x)
    sigmas = np.asarray(sigmas, dtype=float)
    if sigmas.ndim == 2:
        sigmas = sigmas[None, :, :]
    if sigmas.shape[0] != k:
        raise ValidationError(f"expected {k} covariances, got {sigmas.shape[0]}")
    a = similarity_stack(xm, sigmas)
    seed = _derived_seed(cfg.seed, 1)
    z, report = _solve(a, cfg, xm.shape[1], None, seed)
    return _round(z, k, cfg), z, report


def _derived_seed(seed: int, outer: int) -> int:
    return int(np.random.SeedSequence([seed, outer]).generate_state(1)[0])


def ilasdp(
    x, init, k: int, cfg: IlasdpConfig | None = None
) -> tuple[Partition, IlasdpTrace, SolveReport]:
    """Alternating maximization over memberships and covariances.

    ``init`` is either a hard Partition (its within-cluster covariances seed
    the first solve and its lift is the first membership reference) or a
    ``(k, p, p)`` covariance stack.
    """
    cfg = cfg or IlasdpConfig()
    xm = _data(x)
    n = xm.shape[1]

    if isinstance(init, Partition):
        if init.k != k or init.n != n:
            raise ValidationError("initial partition does not match data / cluster count")
        sigmas = init_cov_from_partition(xm, init)
        z_prev_blocks = lift(init).blocks
        prev_sum = z_prev_blocks.sum(axis=0)
    else:
        sigmas = np.asarray(init, dtype=float)
        if sigmas.ndim == 2:
            sigmas = sigmas[None, :, :]
        if sigmas.shape != (k, xm.shape[0], xm.shape[0]):
            raise ValidationError(
                f"covariance init has shape {sigmas.shape}, expected {(k, xm.shape[0], xm.shape[0])}"
            )
        z_prev_blocks = None
        prev_sum = None

    trace = IlasdpTrace()
    a = similarity_stack(xm, sigmas)
    report = None
    z = None

    for outer in range(1, cfg.max_outer + 1):
        z_new, report = _solve(a, cfg, n, z_prev_blocks, _derived_seed(cfg.seed, outer))

        # monotone safeguard: an inexact solve must not lower the objective
        # under the similarity stack it was given
        if z_prev_blocks is not None:
            prev_obj = lifted_objective(a, z_prev_blocks)
            if lifted_objective(a, z_new.blocks) < prev_obj and outer > 1:
                trace.iterations = outer
                trace.objective.append(trace.objective[-1] if trace.objective else prev_obj)
                trace.rel_change.append(0.0)
                if cfg.record_loglik and trace.loglik:
                    trace.loglik.append(trace.loglik[-1])
                break

        z = z_new
        new_sum = z.membership_sum()
        if prev_sum is not None:
            denom = np.linalg.norm(prev_sum.ravel())
            r = float(np.linalg.norm((new_sum - prev_sum).ravel()) / max(denom, 1e-30))
        else:
            r = np.inf

        masses = np.einsum("kij->k", z.blocks)
        degenerate = masses <= SOFT_MASS_TOL
        if degenerate.any() and outer == 1:
            bad = int(np.flatnonzero(degenerate)[0])
            raise EmptySoftClusterError(bad, float(masses[bad])) from None
        try:
            new_sigmas = covariance_update(xm, z)
        except EmptySoftClusterError:
            new_sigmas = sigmas.copy()
            for c in np.flatnonzero(~degenerate):
                new_sigmas[c] = covariance_update(xm, z.blocks[c : c + 1])[0]
        else:
            if degenerate.any():
                for c in np.flatnonzero(degenerate):
                    new_sigmas[c] = sigmas[c]
        sigmas = new_sigmas

        a = similarity_stack(xm, sigmas)
        trace.objective.append(lifted_objective(a, z.blocks))
        trace.rel_change.append(r)
        if cfg.record_loglik:
            rounded = _round(z, k, cfg)
            trace.loglik.append(profile_loglik(xm, rounded, sigmas))
        trace.iterations = outer
        z_prev_blocks = z.blocks
        prev_sum = new_sum

        if np.isfinite(r) and r < cfg.rel_tol:
            break

    partition = _round(z, k, cfg)
    return partition, trace, report
