"""Command-line interface.

Subcommands: ``simulate`` (draw a synthetic mixture to CSV), ``cluster``
(label a CSV dataset), ``benchmark`` (replicated sweeps from a YAML config),
``diagnose`` (separation diagnostics of a labeled dataset).

File conventions: data CSVs hold one sample per row with an optional header;
label files are single-column 1-based integers. Exit codes: 0 success,
2 input/validation error, 3 solver numeric failure, 4 config error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np
import yaml

from . import benchmark as bench
from .baselines import em_gmm, hierarchical, kmeans, mem, spectral_clustering
from .errors import ConfigError, EmptySoftClusterError, LaclustError, NumericFailureError, ValidationError
from .generators import FAMILIES, GeneratorSpec, generate, landsat_transform
from .metrics import misclustering_error, separation_diagnostics
from .model import Partition
from .pipeline import init_cov_from_partition

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_CONFIG = 4


def read_matrix_csv(path) -> np.ndarray:
    """Read a samples-in-rows CSV with an optional header row."""
    rows = []
    header_skipped = False
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = [c.strip() for c in line.split(",")]
            try:
                rows.append([float(c) for c in cells])
            except ValueError as err:
                if lineno == 1 and not header_skipped:
                    header_skipped = True
                    continue
                bad = next((i for i, c in enumerate(cells) if not _is_float(c)), 0)
                raise ValidationError(
                    f"{path}: cannot parse row {lineno}, column {bad + 1}"
                ) from err
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValidationError(f"{path}: ragged rows (widths {sorted(widths)})")
    mat = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(mat)):
        raise ValidationError(f"{path}: non-finite entries")
    return mat


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def read_labels_csv(path, n: int | None = None) -> np.ndarray:
    mat = read_matrix_csv(path)
    if mat.shape[1] != 1:
        raise ValidationError(f"{path}: label files must have a single column")
    labels = mat[:, 0]
    if np.any(labels != np.round(labels)):
        raise ValidationError(f"{path}: labels must be integers")
    labels = labels.astype(int) - 1  # files are 1-based
    if labels.min() < 0:
        raise ValidationError(f"{path}: labels must be >= 1")
    if n is not None and labels.size != n:
        raise ValidationError(f"{path}: {labels.size} labels for {n} samples")
    return labels


def write_labels_csv(path, labels: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("label\n")
        for v in np.asarray(labels, dtype=int) + 1:
            fh.write(f"{v}\n")


def write_matrix_csv(path, mat: np.ndarray) -> None:
    mat = np.asarray(mat, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(f"x{j + 1}" for j in range(mat.shape[1])) + "\n")
        for row in mat:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh) or {}
    except OSError as err:
        raise ConfigError(f"cannot read config file: {err}") from err
    except yaml.YAMLError as err:
        raise ConfigError(f"malformed config file: {err}") from err
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a key-value tree")
    return cfg


def _opt(args, config: dict, name: str, default):
    """CLI value if given, else config value, else default."""
    value = getattr(args, name.replace("-", "_"), None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return default


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="laclust",
        description="Likelihood-adjusted SDP clustering toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def shared(p):
        p.add_argument("--config", help="YAML config file; CLI flags override it")
        p.add_argument("--k", type=int, help="number of clusters")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", help="output path")

    sim = sub.add_parser("simulate", help="draw a synthetic mixture to CSV")
    shared(sim)
    sim.add_argument("--family", choices=FAMILIES)
    sim.add_argument("--n", type=int)
    sim.add_argument("--p", type=int)
    sim.add_argument("--sep", type=float, help="separation (lambda / d / gamma)")
    sim.add_argument("--cond", type=float, help="covariance condition parameter L")
    sim.add_argument("--beta", type=float, help="random-cov spectrum spread")
    sim.add_argument("--labels-out", help="write true labels to this CSV")

    clu = sub.add_parser("cluster", help="cluster a CSV dataset")
    shared(clu)
    clu.add_argument("input", help="data CSV, one sample per row")
    clu.add_argument("--method", choices=bench.METHOD_NAMES)
    clu.add_argument("--init", choices=("hc", "kmeanspp", "random", "labels-file"))
    clu.add_argument("--init-labels", help="labels CSV used when --init labels-file")
    clu.add_argument("--init-k", type=int, help="initializer cluster count (merged down to k)")
    clu.add_argument("--perturb-alpha", type=float)
    clu.add_argument("--solver", choices=("auto", "admm", "bm"))
    clu.add_argument("--rank-factor", type=int)
    clu.add_argument("--max-iters", type=int)
    clu.add_argument("--tol", type=float)
    clu.add_argument("--screen", action="store_true", default=None,
                     help="F-test attribute screening before clustering")
    clu.add_argument("--lda", action="store_true", default=None,
                     help="discriminant reduction before clustering")
    clu.add_argument("--subsample-gamma", type=float, help="sketch fraction for sketchlift")
    clu.add_argument("--pre-transform", choices=("none", "landsat"))
    clu.add_argument("--truth", help="ground-truth labels CSV for metrics")
    clu.add_argument("--metrics-out", help="metrics JSON path")

    ben = sub.add_parser("benchmark", help="run a replicated benchmark sweep")
    shared(ben)
    ben.add_argument("--jobs", type=int, help="parallel jobs (default: $LACLUST_JOBS or 1)")

    dia = sub.add_parser("diagnose", help="separation diagnostics of labeled data")
    shared(dia)
    dia.add_argument("input", help="data CSV, one sample per row")
    dia.add_argument("--labels", required=True, help="labels CSV (1-based)")

    return parser


def _cmd_simulate(args) -> int:
    config = _load_config(args.config)
    spec = GeneratorSpec(
        family=_opt(args, config, "family", None) or _fail_config("family is required"),
        n=int(_opt(args, config, "n", 0) or _fail_config("n is required")),
        p=int(_opt(args, config, "p", 1)),
        k=int(_opt(args, config, "k", 0) or _fail_config("k is required")),
        sep=_maybe_float(_opt(args, config, "sep", None)),
        cond=_maybe_float(_opt(args, config, "cond", None)),
        beta=_maybe_float(_opt(args, config, "beta", None)),
        seed=int(_opt(args, config, "seed", 0)),
    )
    data = generate(spec)
    out = _opt(args, config, "out", None) or _fail_config("out is required")
    write_matrix_csv(out, data.x.T)
    labels_out = _opt(args, config, "labels-out", None)
    if labels_out:
        write_labels_csv(labels_out, data.true_labels)
    return EXIT_OK


def _maybe_float(v):
    return None if v is None else float(v)


def _fail_config(msg: str):
    raise ConfigError(msg)


def _cmd_cluster(args) -> int:
    config = _load_config(args.config)
    mat = read_matrix_csv(args.input)
    if _opt(args, config, "pre-transform", "none") == "landsat":
        lo, hi = mat.min(axis=0), mat.max(axis=0)
        spread = np.where(hi > lo, hi - lo, 1.0)
        mat = landsat_transform((mat - lo) / spread)
    x = mat.T
    k = int(_opt(args, config, "k", 0) or _fail_config("k is required"))
    if x.shape[1] < k:
        raise ValidationError(f"{x.shape[1]} samples cannot form {k} clusters")
    seed = int(_opt(args, config, "seed", 0))
    method = _opt(args, config, "method", "ilasdp")
    if method not in bench.METHOD_NAMES:
        raise ConfigError(f"unknown method '{method}'")
    init = _opt(args, config, "init", "hc")
    options = {
        "solver": _opt(args, config, "solver", "auto"),
        "rank_factor": int(_opt(args, config, "rank-factor", 2)),
        "max_outer": int(_opt(args, config, "max-iters", 50)),
        "max_iters": int(_opt(args, config, "max-iters", 10000)),
        "rel_tol": float(_opt(args, config, "tol", 1e-2)),
        "screen": bool(_opt(args, config, "screen", False)),
        "lda": bool(_opt(args, config, "lda", False)),
        "gamma": float(_opt(args, config, "subsample-gamma", 1.0)),
    }

    t0 = time.perf_counter()
    if init == "labels-file":
        init_path = _opt(args, config, "init-labels", None) or _fail_config(
            "--init labels-file needs --init-labels"
        )
        init_part = Partition(read_labels_csv(init_path, n=x.shape[1]), k)
        alpha = float(_opt(args, config, "perturb-alpha", 0.0))
        if alpha > 0:
            from .baselines import perturb_labels

            init_part = perturb_labels(init_part, alpha, k, seed=seed)
        if method == "em":
            part, _, trace = em_gmm(x, k, init_part)
            iters = len(trace)
        elif method == "ilasdp":
            from .pipeline import ilasdp

            cfg = bench._pipeline_config(options, seed)
            part, tr, _ = ilasdp(x, init_part, k, cfg)
            iters = tr.iterations
        else:
            raise ConfigError(f"--init labels-file is not supported for method '{method}'")
    else:
        part, iters = bench.run_single(
            method, x, k, seed, options,
            true_covs=None, init=init,
            init_k=_opt(args, config, "init-k", None),
            perturb_alpha=float(_opt(args, config, "perturb-alpha", 0.0)),
        )
    wall_ms = (time.perf_counter() - t0) * 1e3

    out = _opt(args, config, "out", None) or _fail_config("out is required")
    write_labels_csv(out, part.labels)

    metrics_out = _opt(args, config, "metrics-out", None)
    truth_path = _opt(args, config, "truth", None)
    if metrics_out:
        payload = {
            "method": method,
            "seed": seed,
            "iterations": int(iters),
            "wall_ms": wall_ms,
            "error": None,
            "delta": None,
            "D_min": None,
            "M": None,
            "m": None,
        }
        if truth_path:
            truth = read_labels_csv(truth_path, n=x.shape[1])
            payload["error"] = misclustering_error(part.labels, truth)
        try:
            part.require_nonempty()
            covs = init_cov_from_partition(x, part)
            means = np.stack([x[:, idx].mean(axis=1) for idx in part.groups()])
            diag = separation_diagnostics(means, covs, part.sizes())
            payload.update(
                delta=diag.delta, D_min=diag.min_divergence,
                M=diag.max_op_ratio, m=diag.min_harmonic_size,
            )
        except LaclustError:
            pass
        with open(metrics_out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


def _cmd_benchmark(args) -> int:
    config = _load_config(args.config)
    if not config:
        raise ConfigError("benchmark needs a --config YAML file")
    try:
        cfg = bench.BenchmarkConfig(
            methods=config.get("methods") or _fail_config("config needs 'methods'"),
            family=config.get("family") or _fail_config("config needs 'family'"),
            n=int(config.get("n", 0) or _fail_config("config needs 'n'")),
            p=int(config.get("p", 1)),
            k=int(config.get("k", 0) or _fail_config("config needs 'k'")),
            grid=config.get("grid", {}),
            fixed=config.get("fixed", {}),
            replicates=int(config.get("replicates", 1)),
            init=config.get("init", "hc"),
            init_k=config.get("init_k"),
            perturb_alpha=float(config.get("perturb_alpha", 0.0)),
            master_seed=int(_opt(args, config, "seed", config.get("master_seed", 0))),
        )
    except (TypeError, ValueError) as err:
        raise ConfigError(f"invalid benchmark config: {err}") from err
    jobs = args.jobs if args.jobs is not None else config.get("jobs")
    rows = bench.run_benchmark(cfg, jobs=jobs)
    out = _opt(args, config, "out", None) or _fail_config("out is required")
    bench.write_rows(rows, out)
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    config = _load_config(args.config)
    mat = read_matrix_csv(args.input)
    x = mat.T
    labels = read_labels_csv(args.labels, n=x.shape[1])
    k = int(_opt(args, config, "k", labels.max() + 1))
    part = Partition(labels, k).require_nonempty()
    covs = init_cov_from_partition(x, part)
    means = np.stack([x[:, idx].mean(axis=1) for idx in part.groups()])
    diag = separation_diagnostics(means, covs, part.sizes())
    payload = {
        "delta": diag.delta,
        "delta_sq": diag.delta_sq,
        "D_min": diag.min_divergence,
        "M": diag.max_op_ratio,
        "m": diag.min_harmonic_size,
        "n_min": diag.min_cluster_size,
        "k": k,
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    out = _opt(args, config, "out", None)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "cluster": _cmd_cluster,
    "benchmark": _cmd_benchmark,
    "diagnose": _cmd_diagnose,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericFailureError, EmptySoftClusterError) as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except LaclustError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
