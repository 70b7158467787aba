"""Solvers for the K-block membership SDP and its single-block special case.

Two routes are provided:

* a consensus ADMM over three copies of the stacked variable, one per
  constraint family (PSD cone per block, nonnegative orthant, affine
  trace/row-sum set), each with an exact cheap projection;
* a low-rank factorization solver that optimizes ``Z_k = U_k U_k^T`` with an
  augmented Lagrangian on the row-sum constraint and projected gradient
  ascent (clamp to the nonnegative orthant, rescale to the Frobenius sphere).

Both maximize ``sum_k <A_k, Z_k>``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NumericFailureError, ValidationError
from .likelihood import SimilarityMatrix
from .model import DEFAULT_SOLVER_TOL, LiftedMembership


@dataclass(frozen=True)
class SolverOptions:
    rho: float = 5.0
    max_iters: int = 10000
    tol: float = 1e-5
    adapt_ratio: float = 10.0
    adapt_factor: float = 2.0
    adapt_every: int = 100
    stall_window: int = 100
    stall_tol: float = 1e-12
    # low-rank route
    bm_feas_tol: float = 1e-5
    bm_max_outer: int = 40
    bm_max_inner: int = 4000
    bm_sigma0: float = 1.0
    bm_noise: float = 1e-3
    bm_inner_tol: float = 1e-8
    bm_step_tol: float = 1e-8


@dataclass(frozen=True)
class SolveReport:
    objective_trace: np.ndarray
    primal_residual: float
    dual_residual: float
    iterations: int
    wall_time_s: float
    termination: str  # "converged" | "max-iters" | "stalled"

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])


@dataclass(frozen=True)
class SdpProblem:
    """Stacked similarity matrices plus solver options."""

    a_list: tuple
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        stack = _as_stack(self.a_list)
        object.__setattr__(self, "a_list", tuple(stack))

    @property
    def k(self) -> int:
        return len(self.a_list)

    @property
    def n(self) -> int:
        return self.a_list[0].shape[0]

    def stacked(self) -> np.ndarray:
        return np.stack(self.a_list)


def _as_stack(a_list) -> list[np.ndarray]:
    mats = []
    for a in a_list:
        m = a.a if isinstance(a, SimilarityMatrix) else np.asarray(a, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"similarity matrix must be square, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValidationError("similarity matrix contains non-finite entries")
        mats.append(0.5 * (m + m.T))
    if not mats:
        raise ValidationError("need at least one similarity matrix")
    n = mats[0].shape[0]
    if any(m.shape != (n, n) for m in mats):
        raise ValidationError("similarity matrices differ in size")
    return mats


def _spectral_scale(a: np.ndarray) -> float:
    """Deterministic power-method estimate of the largest |eigenvalue| across
    blocks, used to normalize the problem before solving."""
    scale = 0.0
    n = a.shape[1]
    for c in range(a.shape[0]):
        v = np.full(n, 1.0 / np.sqrt(n))
        for _ in range(30):
            v = a[c] @ v
            nv = np.linalg.norm(v)
            if nv < 1e-30:
                break
            v /= nv
        scale = max(scale, float(np.abs(v @ (a[c] @ v))))
    return max(scale, 1e-12)


class _AffineProjector:
    """Exact projection of a stacked symmetric variable onto
    ``{sum_k tr(W_k) = t, (sum_k W_k) 1 = 1}``.

    The Gram matrix of the (n + 1) constraint representers has closed form and
    is factorized once per (n, k).
    """

    def __init__(self, n: int, k: int, trace_target: float):
        self.n, self.k, self.trace_target = n, k, trace_target
        gram = np.empty((n + 1, n + 1))
        gram[0, 0] = k * n
        gram[0, 1:] = float(k)
        gram[1:, 0] = float(k)
        gram[1:, 1:] = k * (n * np.eye(n) + np.ones((n, n))) / 2.0
        self._chol = np.linalg.cholesky(gram)

    def __call__(self, w: np.ndarray) -> np.ndarray:
        n = self.n
        rhs = np.empty(n + 1)
        rhs[0] = np.trace(w, axis1=1, axis2=2).sum() - self.trace_target
        rhs[1:] = w.sum(axis=0).sum(axis=1) - 1.0
        mu = np.linalg.solve(self._chol.T, np.linalg.solve(self._chol, rhs))
        out = w - mu[0] * np.eye(n)
        shift = 0.5 * (mu[1:][:, None] + mu[1:][None, :])
        out -= shift
        return out


def _psd_project(w: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(w)
    vals = np.maximum(vals, 0.0)
    out = (vecs * vals[:, None, :]) @ vecs.transpose(0, 2, 1)
    return 0.5 * (out + out.transpose(0, 2, 1))


def _feasible_start(n: int, k: int, trace_target: float) -> np.ndarray:
    # interior point of the feasible set: alpha*I + beta*J per block
    alpha = (trace_target - 1.0) / (n - 1.0) if n > 1 else trace_target
    beta = (1.0 - alpha) / n
    z0 = (alpha * np.eye(n) + beta * np.ones((n, n))) / k
    return np.broadcast_to(z0, (k, n, n)).copy()


def solve_stacked_admm(
    a_stack: np.ndarray,
    trace_target: float,
    options: SolverOptions,
    z0: np.ndarray | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Consensus ADMM on the stacked membership blocks. Returns the consensus
    iterate and a report; the caller wraps or post-processes it."""
    t0 = time.perf_counter()
    a = np.asarray(a_stack, dtype=float)
    k, n = a.shape[0], a.shape[1]
    scale = _spectral_scale(a)
    ah = a / scale

    project_affine = _AffineProjector(n, k, trace_target)
    z = _feasible_start(n, k, trace_target) if z0 is None else np.asarray(z0, dtype=float).copy()
    u = np.zeros((3, k, n, n))
    rho = options.rho
    obj_trace = []
    stall_count = 0
    termination = "max-iters"
    pri_rel = dua_rel = np.inf
    it = 0

    for it in range(1, options.max_iters + 1):
        x_psd = _psd_project(z - u[0])
        x_nn = np.maximum(z - u[1], 0.0)
        x_aff = project_affine(z - u[2])
        x_mean = (x_psd + x_nn + x_aff) / 3.0
        obj = float(np.vdot(ah, x_mean)) * scale
        z_new = x_mean + (u.mean(axis=0) + ah / (3.0 * rho))
        u[0] += x_psd - z_new
        u[1] += x_nn - z_new
        u[2] += x_aff - z_new

        if not np.isfinite(z_new).all():
            raise NumericFailureError(f"non-finite ADMM iterate at iteration {it}")

        pri = np.sqrt(
            np.sum((x_psd - z_new) ** 2)
            + np.sum((x_nn - z_new) ** 2)
            + np.sum((x_aff - z_new) ** 2)
        )
        dua = rho * np.sqrt(3.0) * np.linalg.norm((z_new - z).ravel())
        norm_z = np.sqrt(3.0) * np.linalg.norm(z_new.ravel())
        pri_rel = pri / (1.0 + norm_z)
        dua_rel = dua / (1.0 + rho * np.linalg.norm(u.ravel()))
        z = z_new
        obj_trace.append(obj)
        if max(pri_rel, dua_rel) <= options.tol:
            termination = "converged"
            break

        if len(obj_trace) > 1 and abs(obj_trace[-1] - obj_trace[-2]) < options.stall_tol * (1.0 + abs(obj)):
            stall_count += 1
            if stall_count >= options.stall_window:
                termination = "stalled"
                break
        else:
            stall_count = 0

        # residual balancing at a cadence; frozen once close to convergence so
        # the contraction is not disturbed (per-iteration balancing thrashes)
        if (
            options.adapt_every
            and it % options.adapt_every == 0
            and max(pri_rel, dua_rel) > 100.0 * options.tol
        ):
            if pri_rel > options.adapt_ratio * dua_rel and rho < 1e4:
                rho *= options.adapt_factor
                u /= options.adapt_factor
            elif dua_rel > options.adapt_ratio * pri_rel and rho > 1e-4:
                rho /= options.adapt_factor
                u *= options.adapt_factor

    report = SolveReport(
        objective_trace=np.asarray(obj_trace),
        primal_residual=float(pri_rel),
        dual_residual=float(dua_rel),
        iterations=it,
        wall_time_s=time.perf_counter() - t0,
        termination=termination,
    )
    return z, report


def solve_lasdp_admm(
    problem: SdpProblem, z0: np.ndarray | None = None
) -> tuple[LiftedMembership, SolveReport]:
    """Solve the K-block membership SDP by consensus ADMM."""
    z, report = solve_stacked_admm(problem.stacked(), float(problem.k), problem.options, z0=z0)
    return LiftedMembership(0.5 * (z + z.transpose(0, 2, 1)), feas_tol=DEFAULT_SOLVER_TOL), report


@dataclass(frozen=True)
class BmFactor:
    """Nonnegative low-rank factor ``U = [U_1 | ... | U_K]`` with per-block
    width ``s``; the implied membership blocks are ``U_k U_k^T``."""

    u: np.ndarray
    s: int

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.ndim != 2 or self.s < 1 or u.shape[1] % self.s:
            raise ValidationError(f"factor shape {u.shape} incompatible with block width {self.s}")
        object.__setattr__(self, "u", u)

    @property
    def k(self) -> int:
        return self.u.shape[1] // self.s

    def blocks(self) -> np.ndarray:
        n = self.u.shape[0]
        out = np.empty((self.k, n, n))
        for c in range(self.k):
            uc = self.u[:, c * self.s : (c + 1) * self.s]
            out[c] = uc @ uc.T
        return out


def _bm_objective_terms(a: np.ndarray, u: np.ndarray, s: int):
    k = a.shape[0]
    au = np.empty_like(u)
    for c in range(k):
        au[:, c * s : (c + 1) * s] = a[c] @ u[:, c * s : (c + 1) * s]
    return au, float(np.vdot(au, u))


def _bm_project(u: np.ndarray, norm_target: float) -> np.ndarray | None:
    u = np.maximum(u, 0.0)
    nrm = np.linalg.norm(u.ravel())
    if nrm < 1e-30:
        return None
    return u * (norm_target / nrm)


def _bm_init(
    ah: np.ndarray, s: int, trace_target: float, noise: float, seed: int
) -> np.ndarray:
    """Start the factor at the lift of a spectral partition guess, with the
    clusters assigned to blocks by maximum-similarity matching.

    The guess is feasible (row sums exactly one, squared norm exactly the
    trace target), so the augmented Lagrangian starts on the constraint set.
    """
    from scipy.optimize import linear_sum_assignment

    from .baselines import lloyd_rows

    k_blocks, n = ah.shape[0], ah.shape[1]
    n_clusters = max(int(round(trace_target)), 1)
    n_clusters = min(n_clusters, n)
    # double-centered mean similarity: constant row/column shifts are
    # objective-neutral on the feasible set and would pollute the spectrum
    mean_a = ah.mean(axis=0)
    rowm = mean_a.mean(axis=1, keepdims=True)
    grand = mean_a.mean()
    centered = mean_a - rowm - rowm.T + grand
    vals, vecs = np.linalg.eigh(centered)
    weights = np.sqrt(np.maximum(vals[-n_clusters:], 0.0))
    if weights.max() <= 1e-12:
        weights = np.ones(n_clusters)
    emb = vecs[:, -n_clusters:] * weights
    labels, _ = lloyd_rows(emb, n_clusters, seed=seed, n_restarts=5)

    groups = [np.flatnonzero(labels == c) for c in range(n_clusters)]
    indicators = np.zeros((n, n_clusters))
    for c, idx in enumerate(groups):
        if idx.size:
            indicators[idx, c] = 1.0 / np.sqrt(idx.size)

    u = np.zeros((n, s * k_blocks))
    if k_blocks == 1:
        u[:, : n_clusters] = indicators
    else:
        score = np.empty((n_clusters, k_blocks))
        for c in range(n_clusters):
            v = indicators[:, c]
            score[c] = np.array([v @ ah[b] @ v for b in range(k_blocks)])
        rows, cols = linear_sum_assignment(-score)
        for c, b in zip(rows, cols):
            u[:, b * s] = indicators[:, c]

    rng = np.random.default_rng(seed)
    u = u + noise * rng.random(u.shape)
    out = _bm_project(u, np.sqrt(trace_target))
    if out is None:
        raise NumericFailureError("degenerate low-rank initialization")
    return out


def solve_stacked_bm(
    a_stack: np.ndarray,
    trace_target: float,
    options: SolverOptions,
    s: int = 2,
    seed: int = 0,
) -> tuple[BmFactor, SolveReport]:
    """Augmented-Lagrangian projected gradient ascent on the factorized
    problem.

    The inner loop uses Barzilai-Borwein step sizes with a non-monotone
    watchdog (last-10 reference value), which copes with the poor conditioning
    the Mahalanobis similarity matrices induce. Deterministic given
    (inputs, seed)."""
    t0 = time.perf_counter()
    a = np.asarray(a_stack, dtype=float)
    k, n = a.shape[0], a.shape[1]
    if s < 1:
        raise ValidationError("rank factor s must be >= 1")
    scale = _spectral_scale(a)
    ah = a / scale
    norm_target = np.sqrt(trace_target)
    u = _bm_init(ah, s, trace_target, options.bm_noise, seed)

    y = np.zeros(n)
    sigma = options.bm_sigma0
    ones = np.ones(n)
    obj_trace = []
    termination = "max-iters"
    feas = np.inf
    step_rel = np.inf
    total_inner = 0
    prev_feas = np.inf

    def lag_terms(u_):
        au_, obj_ = _bm_objective_terms(ah, u_, s)
        h_ = u_ @ (u_.T @ ones) - ones
        return au_, obj_, h_, obj_ - y @ h_ - 0.5 * sigma * (h_ @ h_)

    def grad_of(u_, au_, h_):
        q = y + sigma * h_
        return 2.0 * au_ - (np.outer(q, ones @ u_) + np.outer(ones, q @ u_))

    for _outer in range(options.bm_max_outer):
        au, obj, h, lag = lag_terms(u)
        g = grad_of(u, au, h)
        eta = 1e-2
        hist = [lag]
        u_prev = g_prev = None
        inner_converged = False
        for _ in range(options.bm_max_inner):
            total_inner += 1
            if u_prev is not None:
                du = (u - u_prev).ravel()
                dg = (g - g_prev).ravel()
                denom = -(du @ dg)
                if denom > 1e-30:
                    eta = min(max((du @ du) / denom, 1e-8), 1e4)
                else:
                    eta = min(eta * 2.0, 1e4)
            ref = max(hist[-10:])
            accepted = False
            for _ in range(40):
                u_try = _bm_project(u + eta * g, norm_target)
                if u_try is None:
                    eta *= 0.5
                    continue
                au_t, obj_t, h_t, lag_t = lag_terms(u_try)
                if lag_t >= ref - 1e-12 * (1.0 + abs(ref)) or lag_t > lag:
                    accepted = True
                    break
                eta *= 0.5
            if not accepted:
                inner_converged = True
                break
            step_rel = np.linalg.norm((u_try - u).ravel()) / (1.0 + np.linalg.norm(u.ravel()))
            u_prev, g_prev = u, g
            u, au, obj, h, lag = u_try, au_t, obj_t, h_t, lag_t
            g = grad_of(u, au, h)
            hist.append(lag)
            flat = (
                len(hist) > 20
                and abs(hist[-1] - hist[-20]) < options.bm_inner_tol * 19.0 * (1.0 + abs(lag))
            )
            if step_rel < options.bm_step_tol or flat:
                inner_converged = True
                break
        if not np.isfinite(u).all():
            raise NumericFailureError("non-finite low-rank iterate")
        obj_trace.append(obj * scale)
        feas = float(np.abs(h).max())
        if feas <= options.bm_feas_tol and inner_converged:
            termination = "converged"
            break
        y = y + sigma * h
        if feas > 0.5 * prev_feas:
            sigma = min(sigma * 2.0, 1e8)
        prev_feas = feas

    report = SolveReport(
        objective_trace=np.asarray(obj_trace),
        primal_residual=feas,
        dual_residual=float(step_rel),
        iterations=total_inner,
        wall_time_s=time.perf_counter() - t0,
        termination=termination,
    )
    return BmFactor(u, s), report


def solve_lasdp_bm(
    problem: SdpProblem, s: int = 2, seed: int = 0
) -> tuple[LiftedMembership, SolveReport]:
    """Solve the K-block membership SDP through its low-rank factorization."""
    factor, report = solve_stacked_bm(
        problem.stacked(), float(problem.k), problem.options, s=s, seed=seed
    )
    blocks = factor.blocks()
    return LiftedMembership(0.5 * (blocks + blocks.transpose(0, 2, 1)), feas_tol=1e-3), report


def solve_kmeans_sdp(
    a,
    k: int,
    options: SolverOptions | None = None,
    solver: str = "admm",
    s: int = 2,
    seed: int = 0,
) -> tuple[np.ndarray, SolveReport]:
    """Single-block membership SDP: trace equals the cluster count, rows sum
    to one, PSD, entrywise nonnegative."""
    options = options or SolverOptions()
    stack = np.stack(_as_stack([a]))
    if solver == "admm":
        z, report = solve_stacked_admm(stack, float(k), options)
        return 0.5 * (z[0] + z[0].T), report
    if solver == "bm":
        factor, report = solve_stacked_bm(stack, float(k), options, s=max(s * k, k), seed=seed)
        z = factor.blocks()[0]
        return 0.5 * (z + z.T), report
    raise ValidationError(f"unknown solver '{solver}'")
