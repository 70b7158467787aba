"""Replicated-experiment runner: sweep generator parameters over a method
list, one result row per (method, grid point, replicate).

Rows are deterministic under a fixed master seed (replicate seeds derive from
a counter), failures are recorded as rows with a NaN error and a reason, and
the table is sorted before writing so reruns are byte-identical except for
the wall-time column.
"""

from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .baselines import em_gmm, hierarchical, kmeans, mem, merge_to_k, perturb_labels, spectral_clustering
from .enhance import ftest_screen, lda_reduce, sketch_and_lift
from .errors import ConfigError, LaclustError
from .generators import GeneratorSpec, family_params, generate
from .likelihood import similarity_stack
from .metrics import misclustering_error
from .model import Partition
from .pipeline import IlasdpConfig, ilasdp, oracle_lasdp
from .rounding import spectral_round
from .sdp import SolverOptions, solve_kmeans_sdp

JOBS_ENV_VAR = "LACLUST_JOBS"

METHOD_NAMES = (
    "ilasdp",
    "lasdp-oracle",
    "sdp",
    "kmeans",
    "em",
    "mem",
    "hc",
    "spectral",
    "sketchlift",
)

GRID_KEYS = ("sep", "cond", "beta", "n", "p", "k")


@dataclass(frozen=True)
class MethodSpec:
    label: str
    method: str
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHOD_NAMES:
            raise ConfigError(f"unknown method '{self.method}'")


def _normalize_methods(entries) -> list[MethodSpec]:
    specs = []
    for entry in entries:
        if isinstance(entry, str):
            specs.append(MethodSpec(entry, entry))
        elif isinstance(entry, dict):
            method = entry.get("method") or entry.get("name")
            if method is None:
                raise ConfigError(f"method entry needs a 'method' field: {entry}")
            label = entry.get("label", method)
            options = {
                k: v for k, v in entry.items() if k not in ("method", "name", "label")
            }
            options.update(entry.get("options", {}))
            options.pop("options", None)
            specs.append(MethodSpec(label, method, options))
        else:
            raise ConfigError(f"unrecognized method entry: {entry!r}")
    if len({s.label for s in specs}) != len(specs):
        raise ConfigError("method labels must be unique")
    return specs


@dataclass(frozen=True)
class BenchmarkConfig:
    methods: tuple
    family: str
    n: int
    p: int
    k: int
    grid: dict = field(default_factory=dict)       # swept generator fields
    fixed: dict = field(default_factory=dict)      # fixed generator fields
    replicates: int = 1
    init: str = "hc"                               # hc | kmeanspp | random
    init_k: int | None = None
    perturb_alpha: float = 0.0
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(_normalize_methods(self.methods)))
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        for key in list(self.grid) + list(self.fixed):
            if key not in GRID_KEYS:
                raise ConfigError(f"unknown generator field '{key}'")
        if self.init not in ("hc", "kmeanspp", "random"):
            raise ConfigError(f"unknown init '{self.init}'")
        grid = {k: list(v) for k, v in self.grid.items()}
        object.__setattr__(self, "grid", grid)

    def grid_points(self) -> list[dict]:
        if not self.grid:
            return [dict(self.fixed)]
        keys = sorted(self.grid)
        points = []
        for combo in product(*(self.grid[k] for k in keys)):
            point = dict(self.fixed)
            point.update(dict(zip(keys, combo)))
            points.append(point)
        return points


def _solver_options(options: dict) -> SolverOptions:
    fields = {}
    if "max_iters" in options:
        fields["max_iters"] = int(options["max_iters"])
    if "tol" in options:
        fields["tol"] = float(options["tol"])
    return SolverOptions(**fields)


def _pipeline_config(options: dict, seed: int) -> IlasdpConfig:
    return IlasdpConfig(
        max_outer=int(options.get("max_outer", 50)),
        rel_tol=float(options.get("rel_tol", 1e-2)),
        solver=options.get("solver", "auto"),
        rank_factor=int(options.get("rank_factor", 2)),
        seed=seed,
        rounding=options.get("rounding", "spectral"),
        n_restarts=int(options.get("n_restarts", 10)),
        solver_options=_solver_options(options),
    )


def make_init(x, k: int, init: str, seed: int, init_k: int | None = None,
              perturb_alpha: float = 0.0) -> Partition:
    """Initialization partition for methods that need one."""
    k_first = init_k or k
    if init == "hc":
        part = hierarchical(x, k_first)
    elif init == "kmeanspp":
        part = kmeans(x, k_first, seed=int(np.random.SeedSequence([seed, 11]).generate_state(1)[0]))
    elif init == "random":
        rng = np.random.default_rng(np.random.SeedSequence([seed, 12]))
        for _ in range(100):
            labels = rng.integers(0, k_first, size=np.asarray(x).shape[-1])
            if np.unique(labels).size == k_first:
                break
        part = Partition(labels, k_first)
    else:
        raise ConfigError(f"unknown init '{init}'")
    if init_k is not None and init_k != k:
        part = merge_to_k(x, part, k)
    if perturb_alpha > 0.0:
        part = perturb_labels(
            part, perturb_alpha, k,
            seed=int(np.random.SeedSequence([seed, 13]).generate_state(1)[0]),
        )
    return part


def _apply_reduction(x, k: int, options: dict, seed: int):
    xm = x
    if options.get("screen"):
        p0 = int(options.get("p0", 2 * k))
        alpha = float(options.get("screen_alpha", 0.7))
        cutoff = float(options.get("screen_cutoff", 1e10))
        keep, _ = ftest_screen(xm, k, p0=p0, alpha=alpha, cutoff_ratio=cutoff,
                               seed=int(np.random.SeedSequence([seed, 14]).generate_state(1)[0]))
        xm = xm[keep, :]
    if options.get("lda"):
        xm, _, _ = lda_reduce(xm, k)
    return xm


def run_single(method: str, x, k: int, seed: int, options: dict,
               true_covs=None, init: str = "hc", init_k=None, perturb_alpha=0.0):
    """Run one method on one dataset; returns (Partition, iterations)."""
    options = dict(options or {})
    if method == "kmeans":
        return kmeans(x, k, seed=seed, n_restarts=int(options.get("n_restarts", 10))), 0
    if method == "hc":
        return hierarchical(x, k, method=options.get("linkage", "ward")), 0
    if method == "spectral":
        return spectral_clustering(x, k, seed=seed), 0
    if method == "mem":
        return mem(x, k, seed=seed, max_iters=int(options.get("max_iters", 200))), 0
    if method == "em":
        part = make_init(x, k, init, seed, init_k, perturb_alpha)
        labels, _, trace = em_gmm(x, k, part, max_iters=int(options.get("max_iters", 200)))
        return labels, len(trace)
    if method == "sdp":
        xm = np.asarray(x, dtype=float)
        z, report = solve_kmeans_sdp(
            xm.T @ xm, k, options=_solver_options(options),
            solver=options.get("solver", "admm"),
            s=int(options.get("rank_factor", 2)), seed=seed,
        )
        return spectral_round(z, k, seed=seed), report.iterations
    if method == "lasdp-oracle":
        if true_covs is None:
            raise ConfigError("lasdp-oracle needs the true covariances")
        cfg = _pipeline_config(options, seed)
        part, _, report = oracle_lasdp(x, true_covs, k, cfg)
        return part, report.iterations
    if method == "ilasdp":
        xm = _apply_reduction(x, k, options, seed)
        cfg = _pipeline_config(options, seed)
        part = make_init(xm, k, init, seed, init_k, perturb_alpha)
        labels, trace, _ = ilasdp(xm, part, k, cfg)
        return labels, trace.iterations
    if method == "sketchlift":
        xm = _apply_reduction(x, k, options, seed)
        cfg = _pipeline_config(options, seed)
        gamma = float(options.get("gamma", 1.0))
        return sketch_and_lift(xm, k, gamma, cfg, seed=seed), 0
    raise ConfigError(f"unknown method '{method}'")


def _grid_value(point: dict, key: str, default):
    return point.get(key, default)


def _job(args):
    (cfg, spec_index, point, replicate, mspec) = args
    seed = int(
        np.random.SeedSequence(
            [cfg.master_seed, spec_index, replicate]
        ).generate_state(1)[0]
    ) % (2**31)
    n = int(_grid_value(point, "n", cfg.n))
    p = int(_grid_value(point, "p", cfg.p))
    k = int(_grid_value(point, "k", cfg.k))
    row = {
        "method": mspec.label,
        "grid_index": spec_index,
        "replicate": replicate,
        "seed": seed,
        "n": n,
        "p": p,
        "k": k,
        "sep": point.get("sep"),
        "cond": point.get("cond"),
        "beta": point.get("beta"),
        "error": float("nan"),
        "iterations": 0,
        "wall_ms": 0.0,
        "reason": "",
    }
    t0 = time.perf_counter()
    try:
        gen = GeneratorSpec(
            family=cfg.family, n=n, p=p, k=k,
            sep=point.get("sep"), cond=point.get("cond"), beta=point.get("beta"),
            seed=seed,
        )
        data = generate(gen)
        true_covs = family_params(gen)[1]
        part, iters = run_single(
            mspec.method, data.x, gen.k, seed, mspec.options,
            true_covs=true_covs, init=cfg.init, init_k=cfg.init_k,
            perturb_alpha=cfg.perturb_alpha,
        )
        row["error"] = misclustering_error(part, data.truth())
        row["iterations"] = int(iters)
    except LaclustError as err:
        row["reason"] = f"{type(err).__name__}: {err}"
    row["wall_ms"] = (time.perf_counter() - t0) * 1e3
    return row


def default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV_VAR, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_benchmark(cfg: BenchmarkConfig, jobs: int | None = None) -> list[dict]:
    """Run the full (method x grid x replicate) sweep; rows sorted by
    (method label, grid index, replicate)."""
    jobs = jobs if jobs is not None else default_jobs()
    tasks = [
        (cfg, gi, point, rep, mspec)
        for mspec in cfg.methods
        for gi, point in enumerate(cfg.grid_points())
        for rep in range(cfg.replicates)
    ]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_job, tasks, chunksize=1))
    else:
        rows = [_job(t) for t in tasks]
    rows.sort(key=lambda r: (r["method"], r["grid_index"], r["replicate"]))
    return rows


RESULT_COLUMNS = (
    "method", "grid_index", "replicate", "seed", "n", "p", "k",
    "sep", "cond", "beta", "error", "iterations", "wall_ms", "reason",
)


def write_rows(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            err = out.get("error")
            out["error"] = "" if err is None or (isinstance(err, float) and np.isnan(err)) else repr(float(err))
            out["wall_ms"] = f"{out['wall_ms']:.3f}"
            for key in ("sep", "cond", "beta"):
                out[key] = "" if out.get(key) is None else repr(float(out[key]))
            writer.writerow(out)


def mean_errors(rows: list[dict], method: str, key: str = "sep") -> dict:
    """Average error per grid value for one method label (NaN rows skipped)."""
    acc: dict = {}
    for row in rows:
        if row["method"] != method:
            continue
        err = row["error"]
        if err is None or (isinstance(err, float) and np.isnan(err)):
            continue
        acc.setdefault(row[key], []).append(err)
    return {v: float(np.mean(errs)) for v, errs in sorted(acc.items())}
