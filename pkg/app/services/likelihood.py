"""Sample covariance, the penalized objective and canonical relabeling."""
import logging

import numpy as np

from app.exceptions import DegenerateDataError, DomainError, InputError, PartitionError
from app.models import CholeskyFactor, Partition, Relabeling, SampleCovariance, default_names

logger = logging.getLogger(__name__)


def compute_covariance(data, center: bool = True, names=None) -> SampleCovariance:
    """S = (1/n) X^t X on the (optionally column-centered) n x p data."""
    X = np.array(data, dtype=float)
    if X.ndim != 2:
        raise InputError(f"data must be an n x p matrix, got shape {X.shape}")
    n, p = X.shape
    if n < 2 or p < 1:
        raise InputError(f"need at least 2 rows and 1 column, got {n} x {p}")
    if not np.all(np.isfinite(X)):
        raise InputError("data contains non-finite entries")
    names = tuple(names) if names is not None else default_names(p)
    if len(names) != p:
        raise InputError(f"got {len(names)} names for {p} columns")

    if center:
        X = X - X.mean(axis=0)
    S = X.T @ X / n
    flat = np.flatnonzero(np.diag(S) <= 0)
    if flat.size:
        name = names[flat[0]]
        raise DegenerateDataError(f"column '{name}' has zero variance", variable=name)
    logger.debug(f"Sample covariance from {n} observations of {p} variables")
    return SampleCovariance(entries=S, names=names)


def row_objectives(B: np.ndarray, S: np.ndarray, lam: float) -> np.ndarray:
    """Per-row terms Q_i = B_i S B_i^t - log B_ii + lam * sum_{k != i} |B_ik|."""
    diag = np.diag(B)
    if np.any(diag <= 0):
        k = int(np.flatnonzero(diag <= 0)[0])
        raise DomainError(f"B[{k + 1},{k + 1}] = {diag[k]} is not positive")
    quad = np.einsum("ij,jk,ik->i", B, S, B)
    penalty = np.abs(B).sum(axis=1) - np.abs(diag)
    return quad - np.log(diag) + lam * penalty


def objective(B: CholeskyFactor | np.ndarray, S: SampleCovariance | np.ndarray, lam: float) -> float:
    """trace(B^t B S) - sum_i log B_ii + lam * sum_{i != j} |B_ij|, summed row by row."""
    values = B.values if isinstance(B, CholeskyFactor) else np.asarray(B, dtype=float)
    entries = S.entries if isinstance(S, SampleCovariance) else np.asarray(S, dtype=float)
    if values.shape != entries.shape:
        raise InputError(f"factor shape {values.shape} does not match covariance shape {entries.shape}")
    return float(row_objectives(values, entries, lam).sum())


def objective_by_block(B: CholeskyFactor, S: SampleCovariance, lam: float) -> list[float]:
    """Block-row terms Q_r; their sum is the full objective."""
    terms = row_objectives(B.values, S.entries, lam)
    return [float(terms[list(block)].sum()) for block in B.partition.blocks]


def validate_partition(partition: Partition, names=None) -> Relabeling:
    """Check the partition against the variable list and return the canonical relabeling."""
    if names is not None:
        names = tuple(names)
        if len(names) != partition.p:
            raise PartitionError(
                f"partition covers {partition.p} variables but the data has {len(names)}"
            )
        if partition.names is not None and partition.names != names:
            unknown = [n for n in partition.names if n not in names]
            raise PartitionError(
                "partition variable names do not match the data"
                + (f": unknown {', '.join(unknown)}" if unknown else " order"),
                offenders=unknown,
            )
    order = tuple(k for block in partition.blocks for k in block)
    bounds = tuple(np.cumsum([0] + [len(b) for b in partition.blocks]).tolist())
    return Relabeling(order=order, bounds=bounds)
