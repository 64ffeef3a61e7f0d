import math

import numpy as np
from fastapi import APIRouter, HTTPException

from app.exceptions import PartitionDAGError
from app.models import AucRequest, AuditRequest
from app.services.evaluate import audit_table, class_curves, classify_pairs, format_audit_table, macro_average

router = APIRouter(prefix="/api/evaluate", tags=["evaluation"])


def _support(variables: list[str], edges) -> np.ndarray:
    lookup = {name: k for k, name in enumerate(variables)}
    B = np.eye(len(variables))
    for parent, child, *weight in edges:
        if parent not in lookup or child not in lookup:
            raise HTTPException(status_code=400, detail=f"Unknown variable in edge {parent} -> {child}")
        B[lookup[child], lookup[parent]] = weight[0] if weight else 1.0
    return B


@router.post("/auc")
async def auc_endpoint(body: AucRequest):
    """AUC-MA of a penalty path of estimates against a true network"""
    try:
        truth = classify_pairs(_support(body.variables, body.truth_edges))
        curves = class_curves([_support(body.variables, est) for est in body.path], truth)
    except PartitionDAGError as e:
        raise HTTPException(status_code=400, detail=str(e))
    score = macro_average(curves)
    return {
        "auc_ma": None if math.isnan(score) else score,
        "classes": [c.model_dump(mode="json") for c in curves],
    }


@router.post("/audit")
async def audit_endpoint(body: AuditRequest):
    """Presence of known edges in one or more estimates"""
    try:
        estimates = {label: _support(body.variables, edges) for label, edges in body.estimates.items()}
        reports = audit_table(estimates, body.known_edges, body.variables)
    except PartitionDAGError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return {
        "reports": {label: r.model_dump() for label, r in reports.items()},
        "table": format_audit_table(reports),
    }
