"""Ground-truth factors, Gaussian data and the replicated simulation protocol."""
import logging
import time

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import solve_triangular

from app.exceptions import InputError
from app.models import (
    CholeskyFactor,
    Edge,
    ExperimentCell,
    ExperimentReport,
    FitOptions,
    Partition,
    TrueModel,
)
from app.services.evaluate import auc_ma, classify_pairs
from app.services.graph import topological_order
from app.services.likelihood import compute_covariance
from app.services.partitions import resolve_scheme
from app.services.path import fit_path, penalty_grid
from app.services.reports import options_payload

logger = logging.getLogger(__name__)

WEIGHT_LOW, WEIGHT_HIGH = 0.3, 0.7


def task_rng(master_seed: int, replication: int, n_index: int) -> np.random.Generator:
    """Generator for one (replication, sample size) task.

    The stream is a pure function of (master_seed, replication, n_index), so
    tasks can run in any order or concurrently.
    """
    return np.random.default_rng([master_seed, replication, n_index])


def random_dag(p: int, sparsity: float, seed: int) -> list[tuple[int, int]]:
    """Each order-respecting pair of a random topological order is an edge with probability 1 - sparsity."""
    if not 0 < sparsity < 1:
        raise InputError(f"sparsity must be in (0, 1), got {sparsity}")
    if p < 1:
        raise InputError(f"need p >= 1, got {p}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(p)
    draws = rng.random((p, p))
    a, b = np.triu_indices(p, k=1)
    keep = draws[a, b] < 1.0 - sparsity
    edges = [(int(order[x]), int(order[y])) for x, y in zip(a[keep], b[keep])]
    return sorted(edges)


def cholesky_from_dag(edges, p: int, seed: int) -> TrueModel:
    """Unit-diagonal B with B[child, parent] = +/-Uniform(0.3, 0.7) for every edge."""
    edges = sorted({(int(u), int(v)) for u, v in edges})
    order = topological_order(edges, p)
    rng = np.random.default_rng(seed)
    magnitudes = rng.uniform(WEIGHT_LOW, WEIGHT_HIGH, size=len(edges))
    signs = rng.choice([-1.0, 1.0], size=len(edges))
    B = np.eye(p)
    weighted = []
    for (u, v), m, s in zip(edges, magnitudes, signs):
        B[v, u] = s * m
        weighted.append(Edge(u, v, float(s * m)))
    factor = CholeskyFactor(values=B, partition=Partition.singletons(order))
    return TrueModel(b_true=factor, edges=tuple(weighted), seed=seed, topological_order=tuple(order))


def sample_observations(model: TrueModel, n: int, seed=None, rng: np.random.Generator | None = None) -> np.ndarray:
    """n draws from N(0, (B^t B)^-1) by solving B x = z, z ~ N(0, I)."""
    if n < 1:
        raise InputError(f"need n >= 1, got {n}")
    rng = rng if rng is not None else np.random.default_rng(seed)
    order = list(model.topological_order)
    B_c = model.b_true.values[np.ix_(order, order)]  # lower triangular in topological order
    Z = rng.standard_normal((n, model.p))
    X_c = solve_triangular(B_c, Z.T, lower=True).T
    X = np.empty_like(X_c)
    X[:, order] = X_c
    return X


def _run_cell(
    model: TrueModel,
    partitions: dict[str, Partition],
    n: int,
    replication: int,
    n_index: int,
    grid_size: int,
    seed: int,
    options: FitOptions,
) -> dict[str, tuple[float, float]]:
    rng = task_rng(seed, replication, n_index)
    X = sample_observations(model, n, rng=rng)
    S = compute_covariance(X, center=True)
    truth = classify_pairs(model.b_true)
    scores = {}
    for name, partition in partitions.items():
        tick = time.perf_counter()
        grid = penalty_grid(S, partition, grid_size, options)
        path = fit_path(S, partition, grid, options)
        scores[name] = (auc_ma(path, truth), time.perf_counter() - tick)
    logger.info(
        f"Replication {replication + 1}, n={n}: "
        + ", ".join(f"{k}={v[0]:.4f}" for k, v in scores.items())
    )
    return scores


def experiment(
    replications: int,
    n_list,
    model: TrueModel,
    partitions,
    grid_size: int = 30,
    seed: int = 0,
    options: FitOptions | None = None,
) -> ExperimentReport:
    """Replicated data generation, penalty paths per partition, and AUC-MA aggregation.

    `partitions` maps display names to Partition objects or scheme strings
    (resolved over the true topological order).
    """
    if replications < 1:
        raise InputError(f"need at least one replication, got {replications}")
    n_list = [int(n) for n in n_list]
    if not n_list or min(n_list) < 2:
        raise InputError("sample sizes must be >= 2")
    options = options or FitOptions()
    resolved = {
        # simulated covariances carry default names, so partitions are matched by index only
        name: part.model_copy(update={"names": None})
        if isinstance(part, Partition)
        else resolve_scheme(part, model.topological_order)
        for name, part in (partitions.items() if isinstance(partitions, dict) else ((s, s) for s in partitions))
    }
    cell_options = options.model_copy(update={"thread_count": 1})
    tasks = [(rep, k, n) for k, n in enumerate(n_list) for rep in range(replications)]
    logger.info(f"Experiment: p={model.p}, {len(tasks)} tasks, partitions {list(resolved)}")

    run = delayed(_run_cell)
    if options.thread_count > 1:
        outcomes = Parallel(n_jobs=options.thread_count)(
            run(model, resolved, n, rep, k, grid_size, seed, cell_options) for rep, k, n in tasks
        )
    else:
        outcomes = [_run_cell(model, resolved, n, rep, k, grid_size, seed, cell_options) for rep, k, n in tasks]

    cells = []
    seconds: dict[str, list[float]] = {name: [] for name in resolved}
    for name in resolved:
        for k, n in enumerate(n_list):
            values = [out[name][0] for (rep, kk, _), out in zip(tasks, outcomes) if kk == k]
            seconds[name].extend(out[name][1] for (_, kk, _), out in zip(tasks, outcomes) if kk == k)
            cells.append(
                ExperimentCell(
                    partition=name, n=n, auc_ma=values, mean=float(np.mean(values)), std=float(np.std(values))
                )
            )
    return ExperimentReport(
        p=model.p,
        true_edge_count=len(model.edges),
        replications=replications,
        n_list=n_list,
        grid_size=grid_size,
        seed=seed,
        partitions=list(resolved),
        blocks={name: [list(block) for block in part.blocks] for name, part in resolved.items()},
        options=options_payload(options),
        cells=cells,
        seconds={name: float(np.mean(v)) for name, v in seconds.items()},
    )
