"""Command-line front end: fit, path, simulate, eval and serve."""
import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from app.config import configure_logging, get_settings
from app.data.partition_schemes import get_scheme_list
from app.exceptions import InputError, PartitionDAGError
from app.models import FitOptions, Partition, RunConfig
from app.services import files
from app.services.evaluate import (
    audit_table,
    class_curves,
    classify_pairs,
    format_audit_table,
    format_auc_table,
    format_timing_table,
    macro_average,
)
from app.services.likelihood import compute_covariance
from app.services.optimizer import fit
from app.services.path import fit_path, penalty_grid, select_lambda_for_density
from app.services.reports import fit_summary, path_summary, timings_payload
from app.services.simulate import cholesky_from_dag, experiment, random_dag

logger = logging.getLogger(__name__)


def _load(config: RunConfig):
    X, names = files.read_data_csv(config.data)
    S = compute_covariance(X, center=config.center, names=names)
    if config.partition:
        partition = files.read_partition_file(config.partition, names)
    else:
        partition = Partition.single(len(names), names=names)
    return X.shape[0], names, S, partition


def cmd_fit(config: RunConfig) -> int:
    n, names, S, partition = _load(config)
    options = config.fit_options()
    selection = None
    if config.target_density is not None:
        selection = select_lambda_for_density(
            S, partition, config.target_density, config.density_tolerance, options
        )
        result = selection.result
    else:
        result = fit(S, partition, options)

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files.write_edges_tsv(out / "edges.tsv", result.estimate.edges, names)
    summary = fit_summary(result, names, partition, options, n, config.center, selection)
    files.write_json(out / "summary.json", summary)
    files.write_json(out / "timings.json", timings_payload(result, options))
    print(
        f"lambda={result.lam:.6g} edges={summary['edge_count']} density={summary['density']:.4f} "
        f"converged={result.converged} -> {out}"
    )
    return 0


def cmd_path(config: RunConfig) -> int:
    n, names, S, partition = _load(config)
    options = config.fit_options()
    grid = penalty_grid(S, partition, config.grid_size, options)
    path = fit_path(S, partition, grid, options)

    out = Path(config.out_dir) / "path"
    out.mkdir(parents=True, exist_ok=True)
    summary = path_summary(path, names, partition, options, n, config.center)
    for k, (point, result) in enumerate(zip(summary["points"], path.results)):
        name = f"edges_{k:02d}.tsv"
        files.write_edges_tsv(out / name, result.estimate.edges, names)
        point["edges_file"] = name
    files.write_json(out / "path.json", summary)
    print(f"{len(path)} fits from lambda={grid[0]:.6g} to {grid[-1]:.6g} -> {out}")
    return 0


def _parse_named_files(items) -> dict[str, str]:
    named = {}
    for item in items or []:
        label, sep, path = item.partition("=")
        if not sep or not label or not path:
            raise InputError(f"expected NAME=PATH, got '{item}'")
        named[label] = path
    return named


def cmd_simulate(args, config: RunConfig) -> int:
    if args.network:
        edges, names = files.read_network(args.network, args.nodes)
        p = len(names)
    else:
        p, sparsity = int(args.random[0]), float(args.random[1])
        edges = random_dag(p, sparsity, config.seed)
        names = [str(k + 1) for k in range(p)]
    model = cholesky_from_dag(edges, p, config.seed)

    partitions: dict = {s.strip(): s.strip() for s in args.partitions.split(",") if s.strip()}
    for label, path in _parse_named_files(args.partition_file).items():
        partitions[label] = files.read_partition_file(path, names)
    if not partitions:
        raise InputError("no partitions to compare")

    options = config.fit_options()
    report = experiment(
        args.reps, args.n, model, partitions, grid_size=config.grid_size, seed=config.seed, options=options
    )

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = report.model_dump(exclude={"seconds"})
    payload["blocks"] = {
        label: [[names[k] for k in block] for block in blocks] for label, blocks in report.blocks.items()
    }
    files.write_json(out / "report.json", payload)
    table = format_auc_table(report)
    (out / "report.txt").write_text(table + "\n", encoding="utf-8")
    files.write_json(out / "timings.json", {"thread_count": options.thread_count, "seconds": report.seconds})
    (out / "timings.txt").write_text(format_timing_table(report) + "\n", encoding="utf-8")
    files.write_edges_tsv(out / "truth.tsv", list(model.edges), names)
    print(table)
    return 0


def _estimates_from_args(args) -> tuple[list[str], dict[str, np.ndarray]]:
    if args.path_dir:
        directory = Path(args.path_dir)
        manifest = files.read_json(directory / "path.json")
        names = manifest["variables"]
        estimates = {
            point["edges_file"]: files.read_estimate_tsv(directory / point["edges_file"], names)
            for point in manifest["points"]
        }
        return names, estimates
    if not args.estimate or not args.data:
        raise InputError("eval needs --path-dir, or --estimate files together with --data")
    names = files.read_header(args.data)
    return names, {Path(e).name: files.read_estimate_tsv(e, names) for e in args.estimate}


def cmd_eval(args, config: RunConfig) -> int:
    if not args.truth and not args.known:
        raise InputError("eval needs --truth and/or --known")
    names, estimates = _estimates_from_args(args)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if args.truth:
        truth_matrix = np.eye(len(names))
        for parent, child in files.read_truth_edges(args.truth, names):
            truth_matrix[child, parent] = 1.0
        curves = class_curves(list(estimates.values()), classify_pairs(truth_matrix))
        score = macro_average(curves)
        payload = {
            "auc_ma": None if math.isnan(score) else score,
            "classes": [c.model_dump(mode="json") for c in curves],
            "estimates": list(estimates),
        }
        files.write_json(out / "eval.json", payload)
        print(f"AUC-MA = {payload['auc_ma']}")

    if args.known:
        known = files.read_known_edges(args.known)
        reports = audit_table(estimates, known, names)
        files.write_json(out / "audit.json", {label: r.model_dump() for label, r in reports.items()})
        table = format_audit_table(reports)
        (out / "audit.txt").write_text(table + "\n", encoding="utf-8")
        print(table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(
        prog="pdag", description="Sparse Cholesky / DAG estimation under partition-based orderings"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def fit_flags(p):
        p.add_argument("--tol", type=float, default=settings.tol)
        p.add_argument("--max-sweeps", type=int, default=settings.max_sweeps)
        p.add_argument("--threads", type=int, default=settings.threads)
        p.add_argument("--out-dir", default=settings.out_dir)

    fit_p = sub.add_parser("fit", help="Fit one penalty")
    fit_p.add_argument("data")
    fit_p.add_argument("partition", nargs="?", help="one block per line, upstream first")
    fit_p.add_argument("--lambda", dest="lam", type=float)
    fit_p.add_argument("--target-density", type=float)
    fit_p.add_argument("--density-tolerance", type=float, default=0.02)
    fit_p.add_argument("--no-center", dest="center", action="store_false")
    fit_flags(fit_p)

    path_p = sub.add_parser("path", help="Fit a descending penalty grid")
    path_p.add_argument("data")
    path_p.add_argument("partition", nargs="?")
    path_p.add_argument("--grid-size", type=int, default=settings.grid_size)
    path_p.add_argument("--no-center", dest="center", action="store_false")
    fit_flags(path_p)

    sim_p = sub.add_parser(
        "simulate",
        help="Replicated simulation experiment",
        epilog="partition schemes:\n" + get_scheme_list(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    source = sim_p.add_mutually_exclusive_group(required=True)
    source.add_argument("--network", help="true network edge list, 'parent child' per line")
    source.add_argument("--random", nargs=2, metavar=("P", "SPARSITY"))
    sim_p.add_argument("--nodes", type=int, help="pad a labelled network to this many nodes")
    sim_p.add_argument("--n", type=int, nargs="+", default=[40, 50, 100, 200])
    sim_p.add_argument("--reps", type=int, default=20)
    sim_p.add_argument("--partitions", default="CCDR,PDAG-2,PDAG-3,PDAG-4")
    sim_p.add_argument("--partition-file", action="append", metavar="NAME=PATH")
    sim_p.add_argument("--grid-size", type=int, default=settings.grid_size)
    sim_p.add_argument("--seed", type=int, default=0)
    fit_flags(sim_p)

    eval_p = sub.add_parser("eval", help="AUC-MA against a true network and/or a known-edge audit")
    eval_p.add_argument("--path-dir")
    eval_p.add_argument("--estimate", action="append")
    eval_p.add_argument("--data", help="data CSV whose header lists the variables")
    eval_p.add_argument("--truth")
    eval_p.add_argument("--known")
    eval_p.add_argument("--out-dir", default=settings.out_dir)

    sub.add_parser("serve", help="Run the HTTP API")
    parser.set_defaults(log_level=settings.log_level)
    return parser


def _config(args) -> RunConfig:
    fields = {
        "command": args.command,
        "data": getattr(args, "data", None),
        "partition": getattr(args, "partition", None),
        "lam": getattr(args, "lam", None),
        "target_density": getattr(args, "target_density", None),
        "density_tolerance": getattr(args, "density_tolerance", 0.02),
        "grid_size": getattr(args, "grid_size", 30),
        "tol": getattr(args, "tol", FitOptions().tol),
        "max_sweeps": getattr(args, "max_sweeps", FitOptions().max_sweeps),
        "threads": getattr(args, "threads", 1),
        "seed": getattr(args, "seed", 0),
        "center": getattr(args, "center", True),
        "out_dir": args.out_dir,
    }
    return RunConfig(**fields)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)

    if args.command == "serve":
        import uvicorn

        settings = get_settings()
        uvicorn.run("app.main:app", host=settings.host, port=settings.port)
        return 0

    try:
        config = _config(args)
        if args.command == "fit":
            return cmd_fit(config)
        if args.command == "path":
            return cmd_path(config)
        if args.command == "simulate":
            return cmd_simulate(args, config)
        return cmd_eval(args, config)
    except (PartitionDAGError, ValidationError) as e:
        logger.debug("Run failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
