import io
import logging

from fastapi import APIRouter, File, Form, HTTPException, UploadFile
from pydantic import ValidationError
from starlette.concurrency import run_in_threadpool

from app.data.partition_schemes import PARTITION_SCHEMES
from app.exceptions import PartitionDAGError
from app.models import Partition, RunConfig
from app.services import files
from app.services.likelihood import compute_covariance
from app.services.optimizer import fit
from app.services.path import fit_path, penalty_grid, select_lambda_for_density
from app.services.reports import edges_payload, fit_summary, path_summary

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api", tags=["estimation"])

# Maximum CSV upload size: 50 MB
MAX_UPLOAD_BYTES = 50 * 1024 * 1024


async def _read_upload(upload: UploadFile) -> bytes:
    content = await upload.read()
    if len(content) > MAX_UPLOAD_BYTES:
        raise HTTPException(
            status_code=400,
            detail=f"File too large. Maximum size is {MAX_UPLOAD_BYTES // (1024 * 1024)} MB",
        )
    return content


async def _load(data: UploadFile, partition: UploadFile | None, center: bool):
    X, names = files.read_data_csv(io.BytesIO(await _read_upload(data)))
    S = compute_covariance(X, center=center, names=names)
    if partition is not None:
        text = (await _read_upload(partition)).decode("utf-8")
        blocks = files.parse_partition(text, names)
    else:
        blocks = Partition.single(len(names), names=names)
    return X.shape[0], names, S, blocks


@router.get("/partition-schemes")
async def get_partition_schemes():
    """Named partition schemes available to simulations"""
    return PARTITION_SCHEMES


@router.post("/fit")
async def fit_endpoint(
    data: UploadFile = File(...),
    partition: UploadFile | None = File(None),
    lam: float | None = Form(None),
    target_density: float | None = Form(None),
    density_tolerance: float = Form(0.02),
    tol: float = Form(1e-4),
    max_sweeps: int = Form(1000),
    threads: int = Form(1),
    center: bool = Form(True),
):
    """Fit one penalty (or the penalty hitting a target edge density)"""
    try:
        config = RunConfig(
            command="fit", data=data.filename or "upload.csv", lam=lam, target_density=target_density,
            density_tolerance=density_tolerance, tol=tol, max_sweeps=max_sweeps, threads=threads, center=center,
        )
        n, names, S, blocks = await _load(data, partition, center)
        options = config.fit_options()
        selection = None
        if target_density is not None:
            selection = await run_in_threadpool(
                select_lambda_for_density, S, blocks, target_density, density_tolerance, options
            )
            result = selection.result
        else:
            result = await run_in_threadpool(fit, S, blocks, options)
    except ValidationError as e:
        raise HTTPException(status_code=422, detail=e.errors(include_url=False, include_context=False))
    except PartitionDAGError as e:
        logger.info(f"Fit request rejected: {e}")
        raise HTTPException(status_code=400, detail=str(e))

    return {
        "summary": fit_summary(result, names, blocks, options, n, center, selection),
        "edges": edges_payload(result, names),
    }


@router.post("/path")
async def path_endpoint(
    data: UploadFile = File(...),
    partition: UploadFile | None = File(None),
    grid_size: int = Form(30),
    tol: float = Form(1e-4),
    max_sweeps: int = Form(1000),
    threads: int = Form(1),
    center: bool = Form(True),
):
    """Fit a descending penalty grid from fully sparse to near-dense"""
    try:
        config = RunConfig(
            command="path", data=data.filename or "upload.csv", grid_size=grid_size,
            tol=tol, max_sweeps=max_sweeps, threads=threads, center=center,
        )
        n, names, S, blocks = await _load(data, partition, center)
        options = config.fit_options()
        grid = await run_in_threadpool(penalty_grid, S, blocks, grid_size, options)
        path = await run_in_threadpool(fit_path, S, blocks, grid, options)
    except ValidationError as e:
        raise HTTPException(status_code=422, detail=e.errors(include_url=False, include_context=False))
    except PartitionDAGError as e:
        logger.info(f"Path request rejected: {e}")
        raise HTTPException(status_code=400, detail=str(e))

    summary = path_summary(path, names, blocks, options, n, center)
    for point, result in zip(summary["points"], path.results):
        point["edges"] = edges_payload(result, names)
    return summary
