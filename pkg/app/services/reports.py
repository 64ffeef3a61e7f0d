"""JSON-ready summaries shared by the CLI and the HTTP routes.

Everything in these payloads is deterministic; wall-clock timings and the
thread count go into a separate timings payload.
"""
from app.models import DensitySelection, FitOptions, FitPath, FitResult, Partition
from app.services.evaluate import edge_density


def options_payload(options: FitOptions, lam: float | None = None) -> dict:
    payload = {"tol": options.tol, "max_sweeps": options.max_sweeps}
    if lam is not None:
        payload["lambda"] = lam
    return payload


def result_summary(result: FitResult) -> dict:
    return {**result.summary(), "density": edge_density(result.estimate)}


def edges_payload(result: FitResult, names) -> list[dict]:
    return [
        {"parent": names[e.parent], "child": names[e.child], "weight": e.weight}
        for e in result.estimate.edges
    ]


def fit_summary(
    result: FitResult,
    names,
    partition: Partition,
    options: FitOptions,
    n_samples: int,
    center: bool,
    selection: DensitySelection | None = None,
) -> dict:
    summary = result_summary(result)
    summary.update(
        options=options_payload(options, result.lam),
        variables=list(names),
        blocks=[[names[k] for k in block] for block in partition.blocks],
        n_samples=n_samples,
        center=center,
    )
    if selection is not None:
        summary.update(
            target_density=selection.target,
            density_hit=selection.hit,
            density_search_iterations=selection.iterations,
        )
    return summary


def timings_payload(result: FitResult, options: FitOptions) -> dict:
    return {
        "thread_count": options.thread_count,
        "block_seconds": list(result.block_seconds),
        "block_sweeps": list(result.block_sweeps),
    }


def path_summary(path: FitPath, names, partition: Partition, options: FitOptions, n_samples: int, center: bool) -> dict:
    return {
        "variables": list(names),
        "blocks": [[names[k] for k in block] for block in partition.blocks],
        "grid": list(path.lambdas),
        "n_samples": n_samples,
        "center": center,
        "options": options_payload(options),
        "points": [result_summary(result) for result in path.results],
    }
