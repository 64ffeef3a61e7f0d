"""Scoring estimated DAGs: pair classes, ROC / AUC-MA, known-edge audits, density."""
import logging
import math

import numpy as np
from sklearn.metrics import auc

from app.exceptions import InputError, InvariantViolation
from app.models import (
    AuditEntry,
    AuditReport,
    CholeskyFactor,
    ExperimentReport,
    FitPath,
    KnownEdge,
    PairClass,
    PairLabels,
    RocCurve,
)

logger = logging.getLogger(__name__)


def _matrix(B) -> np.ndarray:
    return B.values if isinstance(B, CholeskyFactor) else np.asarray(B, dtype=float)


def classify_pairs(B: CholeskyFactor | np.ndarray) -> PairLabels:
    """Label each pair {i, j}, i < j, as FORWARD (i -> j), BACKWARD (j -> i) or NONE."""
    M = _matrix(B)
    p = M.shape[0]
    a, b = np.triu_indices(p, k=1)
    forward = M[b, a] != 0   # B[j, i] != 0 is i -> j
    backward = M[a, b] != 0
    if np.any(forward & backward):
        k = int(np.flatnonzero(forward & backward)[0])
        raise InvariantViolation(f"pair ({a[k] + 1}, {b[k] + 1}) has edges in both directions")
    labels = np.full(a.shape, PairClass.NONE, dtype=np.int8)
    labels[forward] = PairClass.FORWARD
    labels[backward] = PairClass.BACKWARD
    return PairLabels(p=p, labels=labels)


def _estimates(path) -> list:
    if isinstance(path, FitPath):
        return path.estimates
    return list(path)


def roc_points(path, truth: PairLabels, pair_class: PairClass) -> RocCurve:
    """One-vs-rest ROC for one pair class; AUC is normalized by the achieved FPR span."""
    estimates = _estimates(path)
    if not estimates:
        raise InputError("path is empty")
    pair_class = PairClass(pair_class)
    positive = truth.labels == pair_class
    P = int(positive.sum())
    N = int((~positive).sum())
    if P == 0 or N == 0:
        reason = f"class {pair_class.name} has no {'positives' if P == 0 else 'negatives'} in the truth"
        logger.warning(f"ROC undefined: {reason}")
        return RocCurve(pair_class=pair_class, points=(), auc_normalized=None, defined=False, reason=reason)

    points = []
    for est in estimates:
        predicted = classify_pairs(est).labels == pair_class
        if predicted.shape != positive.shape:
            raise InputError("estimate and truth cover different numbers of variables")
        tp = int(np.count_nonzero(predicted & positive))
        fp = int(np.count_nonzero(predicted & ~positive))
        points.append((fp / N, tp / P))
    # ties in FPR climb in TPR, so the curve follows the upper staircase
    points.sort()

    fpr = np.array([pt[0] for pt in points])
    tpr = np.array([pt[1] for pt in points])
    span = float(fpr[-1] - fpr[0])
    if span == 0.0:
        reason = f"class {pair_class.name}: zero false-positive-rate span"
        logger.warning(f"ROC undefined: {reason}")
        return RocCurve(pair_class=pair_class, points=tuple(points), auc_normalized=None, defined=False, reason=reason)
    area = float(auc(fpr, tpr)) / span
    return RocCurve(pair_class=pair_class, points=tuple(points), auc_normalized=area, defined=True)


def class_curves(path, truth: PairLabels) -> list[RocCurve]:
    estimates = _estimates(path)
    return [roc_points(estimates, truth, c) for c in PairClass]


def macro_average(curves: list[RocCurve]) -> float:
    """Mean of the defined normalized AUCs; NaN when no class is defined."""
    defined = [c.auc_normalized for c in curves if c.defined]
    if len(defined) < len(curves):
        skipped = [c.pair_class.name for c in curves if not c.defined]
        logger.warning(f"AUC-MA excludes undefined classes: {', '.join(skipped)}")
    if not defined:
        return math.nan
    return float(np.mean(defined))


def auc_ma(path, truth: PairLabels) -> float:
    """Macro average of the class-wise normalized AUCs along a penalty path."""
    return macro_average(class_curves(path, truth))


def edge_density(B: CholeskyFactor | np.ndarray) -> float:
    """Nonzero off-diagonals over p(p-1)/2."""
    M = _matrix(B)
    p = M.shape[0]
    if p < 2:
        return 0.0
    return float(np.count_nonzero(M[~np.eye(p, dtype=bool)])) / (p * (p - 1) / 2)


def _known(edge, names) -> KnownEdge:
    if isinstance(edge, KnownEdge):
        return edge
    parent, child, *rest = edge
    if isinstance(parent, (int, np.integer)):
        parent, child = names[parent], names[child]
    return KnownEdge(parent=str(parent), child=str(child), sign=rest[0] if rest else None)


def audit_known_edges(B: CholeskyFactor | np.ndarray, known, names=None) -> AuditReport:
    """Presence of each known edge parent -> child in the support of B.

    Known edges are KnownEdge objects or (parent, child[, sign]) tuples of
    0-based indices or names; an expected sign is checked for present edges.
    """
    M = _matrix(B)
    p = M.shape[0]
    names = list(names) if names is not None else [str(k + 1) for k in range(p)]
    lookup = {name: k for k, name in enumerate(names)}
    entries = []
    for edge in known:
        k = _known(edge, names)
        missing = [n for n in (k.parent, k.child) if n not in lookup]
        if missing:
            raise InputError(f"known edge {k.parent} -> {k.child} names unknown variables {missing}")
        weight = float(M[lookup[k.child], lookup[k.parent]])
        present = weight != 0.0
        sign_agrees = None
        if k.sign is not None and present:
            sign_agrees = math.copysign(1, weight) == k.sign
        entries.append(
            AuditEntry(
                parent=k.parent, child=k.child, present=present, weight=weight,
                expected_sign=k.sign, sign_agrees=sign_agrees,
            )
        )
    present = sum(e.present for e in entries)
    total = len(entries)
    return AuditReport(entries=entries, present=present, total=total, fraction=present / total if total else 0.0)


def audit_table(estimates: dict, known, names=None) -> dict[str, AuditReport]:
    """Audit several estimates (e.g. coarse vs fine partitions) against one known-edge list."""
    return {label: audit_known_edges(B, known, names) for label, B in estimates.items()}


def _align(rows: list[list[str]]) -> str:
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in rows]
    rule = "-" * len(lines[0])
    return "\n".join([rule, lines[0], rule, *lines[1:], rule])


def format_audit_table(reports: dict[str, AuditReport]) -> str:
    labels = list(reports)
    first = reports[labels[0]]
    rows = [["Edge", *labels]]
    for k, entry in enumerate(first.entries):
        rows.append(
            [f"({entry.parent}, {entry.child})"]
            + ["Pres" if reports[label].entries[k].present else "Abs" for label in labels]
        )
    rows.append(["Present"] + [f"{reports[l].present}/{reports[l].total} ({reports[l].fraction:.0%})" for l in labels])
    return _align(rows)


def format_auc_table(report: ExperimentReport) -> str:
    rows = [["Method", "Sample size", "AUC-MA", "SD"]]
    for n in report.n_list:
        for name in report.partitions:
            cell = report.cell(name, n)
            rows.append([name, str(n), f"{cell.mean:.4f}", f"{cell.std:.4f}"])
    return _align(rows)


def format_timing_table(report: ExperimentReport) -> str:
    rows = [["Method", "Seconds per path"]]
    rows.extend([name, f"{report.seconds.get(name, float('nan')):.3f}"] for name in report.partitions)
    return _align(rows)
