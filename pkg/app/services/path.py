"""Penalty grids, penalty paths and density-targeted penalty selection."""
import logging
import math

import numpy as np

from app.exceptions import GridError, InputError
from app.models import DensitySelection, FitOptions, FitPath, FitResult, Partition, SampleCovariance
from app.services.evaluate import edge_density
from app.services.optimizer import fit

logger = logging.getLogger(__name__)

MAX_DOUBLINGS = 60
GRID_RATIO = 1e4
MAX_BISECTIONS = 40


def _fit_at(S: SampleCovariance, partition: Partition, options: FitOptions, lam: float) -> FitResult:
    return fit(S, partition, options.model_copy(update={"lam": lam}))


def penalty_grid(S: SampleCovariance, partition: Partition, count: int, options: FitOptions | None = None) -> list[float]:
    """Geometric grid of `count` penalties from fully sparse (lambda_hi) down to lambda_hi / 1e4."""
    if count < 2:
        raise InputError(f"a penalty grid needs at least 2 values, got {count}")
    options = options or FitOptions()
    for doubling in range(MAX_DOUBLINGS):
        lam_hi = 2.0 ** doubling
        if _fit_at(S, partition, options, lam_hi).estimate.edge_count == 0:
            break
    else:
        raise GridError(f"no penalty up to {lam_hi:g} yields an empty graph")
    grid = np.geomspace(lam_hi, lam_hi / GRID_RATIO, count)
    logger.info(f"Penalty grid: {count} values from {lam_hi:.6g} to {lam_hi / GRID_RATIO:.6g}")
    return [float(v) for v in grid]


def fit_path(S: SampleCovariance, partition: Partition, grid, options: FitOptions | None = None) -> FitPath:
    """One independent fit per penalty, in grid order (no warm starts)."""
    options = options or FitOptions()
    grid = [float(v) for v in grid]
    if not grid:
        raise InputError("penalty grid is empty")
    results = tuple(_fit_at(S, partition, options, lam) for lam in grid)
    return FitPath(lambdas=tuple(grid), results=results)


def select_lambda_for_density(
    S: SampleCovariance,
    partition: Partition,
    target_density: float,
    tolerance: float = 0.02,
    options: FitOptions | None = None,
) -> DensitySelection:
    """Bisect log(lambda) between the grid endpoints until the edge density is near the target."""
    if not 0 <= target_density < 1:
        raise InputError(f"target density must be in [0, 1), got {target_density}")
    options = options or FitOptions()
    lam_hi, lam_lo = penalty_grid(S, partition, 2, options)

    if target_density == 0:
        result = _fit_at(S, partition, options, lam_hi)
        return DensitySelection(lam=lam_hi, result=result, density=0.0, target=0.0, hit=True, iterations=0)

    log_hi, log_lo = math.log(lam_hi), math.log(lam_lo)
    best: tuple[float, float, FitResult] | None = None
    iterations = 0
    for iterations in range(1, MAX_BISECTIONS + 1):
        lam = math.exp((log_hi + log_lo) / 2)
        result = _fit_at(S, partition, options, lam)
        density = edge_density(result.estimate)
        logger.debug(f"Density search: lambda={lam:.6g} density={density:.4f}")
        if best is None or abs(density - target_density) < abs(best[1] - target_density):
            best = (lam, density, result)
        if abs(density - target_density) <= tolerance:
            break
        if density > target_density:
            log_lo = math.log(lam)
        else:
            log_hi = math.log(lam)

    lam, density, result = best
    hit = abs(density - target_density) <= tolerance
    if not hit:
        logger.warning(
            f"Density {density:.4f} at lambda={lam:.6g} misses target {target_density} by more than {tolerance}"
        )
    return DensitySelection(
        lam=lam, result=result, density=density, target=target_density, hit=hit, iterations=iterations
    )
