from enum import IntEnum
from typing import Literal, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.exceptions import (
    DegenerateDataError,
    DomainError,
    InputError,
    InvariantViolation,
    PartitionError,
)

# Nonzero B[i, j] with i != j is the edge j -> i (row = child, column = parent).


class Edge(NamedTuple):
    parent: int
    child: int
    weight: float


def _frozen_matrix(value, label: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise InputError(f"{label} must be a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{label} contains non-finite entries")
    return arr


def default_names(p: int) -> tuple[str, ...]:
    return tuple(f"X{k + 1}" for k in range(p))


class SampleCovariance(BaseModel):
    """Symmetric p x p sample covariance with variable names."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    entries: np.ndarray
    names: tuple[str, ...] = ()

    @model_validator(mode="before")
    @classmethod
    def fill_names(cls, data):
        if isinstance(data, dict) and not data.get("names"):
            data = dict(data)
            data["names"] = default_names(len(np.asarray(data["entries"])))
        return data

    @field_validator("entries", mode="before")
    @classmethod
    def validate_entries(cls, v) -> np.ndarray:
        arr = _frozen_matrix(v, "covariance")
        # (a + b) / 2 is commutative in IEEE arithmetic, so the result is exactly symmetric
        arr = (arr + arr.T) / 2.0
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def check_diagonal(self):
        if len(self.names) != self.p:
            raise InputError(f"expected {self.p} variable names, got {len(self.names)}")
        if len(set(self.names)) != len(self.names):
            raise InputError("variable names must be unique")
        for k in range(self.p):
            if not self.entries[k, k] > 0:
                raise DegenerateDataError(
                    f"variable '{self.names[k]}' has zero variance", variable=self.names[k]
                )
        return self

    @property
    def p(self) -> int:
        return self.entries.shape[0]


class Relabeling(BaseModel):
    """Permutation placing block V_1 first, then V_2, and so on.

    order[k] is the original index of canonical position k; bounds are the
    block boundaries m_0 = 0 < m_1 < ... < m_R = p in canonical labels.
    """

    model_config = ConfigDict(frozen=True)

    order: tuple[int, ...]
    bounds: tuple[int, ...]

    @property
    def position(self) -> np.ndarray:
        inverse = np.empty(len(self.order), dtype=int)
        inverse[list(self.order)] = np.arange(len(self.order))
        return inverse

    @property
    def is_identity(self) -> bool:
        return self.order == tuple(range(len(self.order)))

    def to_canonical(self, matrix: np.ndarray) -> np.ndarray:
        idx = np.asarray(self.order)
        return np.ascontiguousarray(matrix[np.ix_(idx, idx)])

    def to_original(self, matrix: np.ndarray) -> np.ndarray:
        idx = np.asarray(self.order)
        out = np.empty_like(matrix)
        out[np.ix_(idx, idx)] = matrix
        return out


class Partition(BaseModel):
    """Ordered blocks V_1..V_R of 0-based variable indices.

    Edges between blocks may only point from an earlier block to a later one.
    """

    model_config = ConfigDict(frozen=True)

    blocks: tuple[tuple[int, ...], ...]
    p: int = 0
    names: tuple[str, ...] | None = None

    @model_validator(mode="before")
    @classmethod
    def fill_p(cls, data):
        if not isinstance(data, dict):
            return data
        data = dict(data)
        data["blocks"] = tuple(
            tuple(sorted(b)) if isinstance(b, (set, frozenset)) else tuple(b) for b in data["blocks"]
        )
        if not data.get("p"):
            data["p"] = len(data["names"]) if data.get("names") else sum(len(b) for b in data["blocks"])
        return data

    @model_validator(mode="after")
    def check_cover(self):
        if not self.blocks:
            raise PartitionError("partition needs at least one block")
        if self.names is not None and len(self.names) != self.p:
            raise PartitionError(f"partition over {self.p} variables given {len(self.names)} names")
        offenders = []
        empty = [r + 1 for r, block in enumerate(self.blocks) if not block]
        if empty:
            offenders.extend(f"block {r} is empty" for r in empty)
        seen: dict[int, int] = {}
        for r, block in enumerate(self.blocks):
            for k in block:
                if not 0 <= k < self.p:
                    offenders.append(f"variable {k + 1} out of range 1..{self.p}")
                elif k in seen:
                    offenders.append(f"variable {self.label(k)} in two blocks ({seen[k] + 1} and {r + 1})")
                else:
                    seen[k] = r
        missing = [self.label(k) for k in range(self.p) if k not in seen]
        if missing:
            offenders.append(f"variables missing from every block: {', '.join(missing)}")
        if offenders:
            raise PartitionError("invalid partition: " + "; ".join(offenders), offenders=offenders)
        return self

    def label(self, k: int) -> str:
        return self.names[k] if self.names is not None else str(k + 1)

    @property
    def R(self) -> int:
        return len(self.blocks)

    @property
    def block_of(self) -> np.ndarray:
        out = np.empty(self.p, dtype=int)
        for r, block in enumerate(self.blocks):
            out[list(block)] = r
        return out

    @classmethod
    def single(cls, p: int, names=None) -> "Partition":
        """One block: no ordering information."""
        return cls(blocks=(tuple(range(p)),), p=p, names=names)

    @classmethod
    def singletons(cls, ordering, names=None) -> "Partition":
        """One block per variable: the ordering is fully known."""
        ordering = [int(k) for k in ordering]
        return cls(blocks=tuple((k,) for k in ordering), p=len(ordering), names=names)

    @classmethod
    def from_names(cls, blocks: list[list[str]], names) -> "Partition":
        """Build a partition from blocks of variable names"""
        names = tuple(names)
        lookup = {name: k for k, name in enumerate(names)}
        unknown = [n for block in blocks for n in block if n not in lookup]
        if unknown:
            raise PartitionError(
                f"unknown variables in partition: {', '.join(unknown)}", offenders=unknown
            )
        return cls(
            blocks=tuple(tuple(lookup[n] for n in block) for block in blocks),
            p=len(names),
            names=names,
        )


class CholeskyFactor(BaseModel):
    """The estimand B of Omega = B^t B, stored in original variable labels."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    partition: Partition

    @field_validator("values", mode="before")
    @classmethod
    def validate_values(cls, v) -> np.ndarray:
        arr = _frozen_matrix(v, "Cholesky factor")
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def check_structure(self):
        B = self.values
        p = B.shape[0]
        if p != self.partition.p:
            raise InputError(f"factor is {p}x{p} but the partition covers {self.partition.p} variables")
        bad = np.flatnonzero(np.diag(B) <= 0)
        if bad.size:
            raise DomainError(f"diagonal entry B[{bad[0] + 1},{bad[0] + 1}] = {B[bad[0], bad[0]]} is not positive")

        block = self.partition.block_of
        later = block[:, None] < block[None, :]
        if np.any(B[later] != 0):
            i, j = np.argwhere(later & (B != 0))[0]
            raise InvariantViolation(
                f"structural zero violated: B[{i + 1},{j + 1}] points from a later block into an earlier one"
            )
        off = (B != 0) & ~np.eye(p, dtype=bool)
        both = off & off.T & (block[:, None] == block[None, :])
        if np.any(both):
            i, j = np.argwhere(both)[0]
            raise InvariantViolation(f"both B[{i + 1},{j + 1}] and B[{j + 1},{i + 1}] are nonzero")

        from app.services.graph import find_cycle

        cycle = find_cycle([(e.parent, e.child) for e in self.edges], p)
        if cycle:
            raise InvariantViolation(
                "within-block graph has a cycle: " + " -> ".join(str(k + 1) for k in cycle)
            )
        return self

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def edges(self) -> list[Edge]:
        B = self.values
        rows, cols = np.nonzero(B)
        found = [Edge(int(j), int(i), float(B[i, j])) for i, j in zip(rows, cols) if i != j]
        return sorted(found, key=lambda e: (e.parent, e.child))

    @property
    def edge_count(self) -> int:
        return int(np.count_nonzero(self.values)) - self.p

    @property
    def precision(self) -> np.ndarray:
        return self.values.T @ self.values


class FitOptions(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lam: float = Field(0.0, ge=0, alias="lambda", description="L1 penalty")
    tol: float = Field(1e-4, gt=0, description="Sup-norm convergence threshold")
    max_sweeps: int = Field(1000, ge=1)
    thread_count: int = Field(1, ge=1)


class FitResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    estimate: CholeskyFactor
    lam: float
    objective_trace: tuple[float, ...]
    sweeps_used: int
    converged: bool
    max_kkt_residual: float
    block_sweeps: tuple[int, ...]
    block_seconds: tuple[float, ...] = Field(default=(), description="Wall-clock per block row")

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    def summary(self) -> dict:
        """Deterministic summary (no timings)"""
        return {
            "lambda": self.lam,
            "objective": self.objective,
            "sweeps": self.sweeps_used,
            "converged": self.converged,
            "max_kkt_residual": self.max_kkt_residual,
            "edge_count": self.estimate.edge_count,
            "block_sweeps": list(self.block_sweeps),
        }


class FitPath(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    lambdas: tuple[float, ...]
    results: tuple[FitResult, ...]

    @model_validator(mode="after")
    def check_lengths(self):
        if len(self.lambdas) != len(self.results):
            raise InputError("path needs one result per penalty value")
        return self

    def __len__(self) -> int:
        return len(self.results)

    @property
    def estimates(self) -> list[CholeskyFactor]:
        return [r.estimate for r in self.results]


class DensitySelection(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    lam: float
    result: FitResult
    density: float
    target: float
    hit: bool
    iterations: int


class TrueModel(BaseModel):
    """Ground-truth factor with unit diagonal and |off-diagonals| in [0.3, 0.7]."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    b_true: CholeskyFactor
    edges: tuple[Edge, ...]
    seed: int
    topological_order: tuple[int, ...]

    @model_validator(mode="after")
    def check_weights(self):
        B = self.b_true.values
        if not np.all(np.diag(B) == 1.0):
            raise InvariantViolation("true factor must have a unit diagonal")
        off = B[~np.eye(B.shape[0], dtype=bool)]
        mags = np.abs(off[off != 0])
        if np.any((mags < 0.3) | (mags > 0.7)):
            raise InvariantViolation("true edge weights must have magnitude in [0.3, 0.7]")
        return self

    @property
    def p(self) -> int:
        return self.b_true.p

    @property
    def covariance(self) -> np.ndarray:
        return np.linalg.inv(self.b_true.precision)


class PairClass(IntEnum):
    NONE = 0
    FORWARD = 1   # i -> j with i < j
    BACKWARD = 2  # j -> i with i < j


class PairLabels(BaseModel):
    """One label per unordered pair {i, j}, i < j, in row-major pair order."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    p: int
    labels: np.ndarray

    @model_validator(mode="after")
    def check_count(self):
        if self.labels.shape != (self.p * (self.p - 1) // 2,):
            raise InputError(f"expected {self.p * (self.p - 1) // 2} pair labels, got {self.labels.shape}")
        return self

    def counts(self) -> dict[PairClass, int]:
        return {c: int(np.count_nonzero(self.labels == c)) for c in PairClass}


class RocCurve(BaseModel):
    pair_class: PairClass
    points: tuple[tuple[float, float], ...]
    auc_normalized: float | None
    defined: bool
    reason: str | None = None


class AuditEntry(BaseModel):
    parent: str
    child: str
    present: bool
    weight: float = 0.0
    expected_sign: Literal[1, -1] | None = None
    sign_agrees: bool | None = None


class AuditReport(BaseModel):
    entries: list[AuditEntry]
    present: int
    total: int
    fraction: float


class KnownEdge(BaseModel):
    parent: str
    child: str
    sign: Literal[1, -1] | None = None


class ExperimentCell(BaseModel):
    partition: str
    n: int
    auc_ma: list[float]
    mean: float
    std: float


class ExperimentReport(BaseModel):
    p: int
    true_edge_count: int
    replications: int
    n_list: list[int]
    grid_size: int
    seed: int
    partitions: list[str]
    blocks: dict[str, list[list[int]]] = Field(default_factory=dict, description="Resolved 0-based blocks per partition")
    options: dict[str, float | int] = Field(default_factory=dict, description="tol and max_sweeps of every fit")
    cells: list[ExperimentCell]
    seconds: dict[str, float] = Field(default_factory=dict, description="Mean wall-clock per partition")

    def cell(self, partition: str, n: int) -> ExperimentCell:
        return next(c for c in self.cells if c.partition == partition and c.n == n)

    def mean_auc(self, partition: str) -> float:
        values = [v for c in self.cells if c.partition == partition for v in c.auc_ma]
        return float(np.mean(values))


# HTTP request bodies

class AucRequest(BaseModel):
    variables: list[str] = Field(..., min_length=2)
    truth_edges: list[tuple[str, str]]
    path: list[list[tuple[str, str]]] = Field(..., min_length=1)


class AuditRequest(BaseModel):
    variables: list[str] = Field(..., min_length=2)
    known_edges: list[KnownEdge] = Field(..., min_length=1)
    estimates: dict[str, list[tuple[str, str, float]]] = Field(..., min_length=1)


class RunConfig(BaseModel):
    """Validated command-line run; checked before any computation starts."""

    command: Literal["fit", "path", "simulate", "eval"]
    data: str | None = None
    partition: str | None = None
    lam: float | None = Field(None, ge=0)
    target_density: float | None = Field(None, ge=0, lt=1)
    density_tolerance: float = Field(0.02, gt=0)
    grid_size: int = Field(30, ge=2)
    tol: float = Field(1e-4, gt=0)
    max_sweeps: int = Field(1000, ge=1)
    threads: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)
    center: bool = True
    out_dir: str = "out"

    @model_validator(mode="after")
    def check_flags(self):
        if self.lam is not None and self.target_density is not None:
            raise InputError("--lambda conflicts with --target-density; give one of them")
        if self.command == "fit" and self.lam is None and self.target_density is None:
            raise InputError("fit needs --lambda or --target-density")
        if self.command in ("fit", "path") and not self.data:
            raise InputError(f"{self.command} needs a data CSV")
        return self

    def fit_options(self) -> FitOptions:
        return FitOptions(
            lam=self.lam or 0.0, tol=self.tol, max_sweeps=self.max_sweeps, thread_count=self.threads
        )
