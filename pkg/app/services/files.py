"""Reading and writing the on-disk formats: data CSV, partition files, edge lists, JSON."""
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from app.exceptions import InputError, PartitionError
from app.models import Edge, KnownEdge, Partition

logger = logging.getLogger(__name__)


def read_data_csv(path) -> tuple[np.ndarray, list[str]]:
    """UTF-8 CSV with a header row of variable names and numeric rows."""
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InputError(f"cannot read data file {path}: {e}") from e
    non_numeric = [c for c in frame.columns if not pd.api.types.is_numeric_dtype(frame[c])]
    if non_numeric:
        raise InputError(f"non-numeric columns in {path}: {', '.join(map(str, non_numeric))}")
    logger.info(f"Loaded {frame.shape[0]} rows x {frame.shape[1]} variables from {path}")
    return frame.to_numpy(dtype=float), [str(c) for c in frame.columns]


def read_header(path) -> list[str]:
    try:
        return [str(c) for c in pd.read_csv(path, nrows=0, encoding="utf-8").columns]
    except (OSError, pd.errors.EmptyDataError) as e:
        raise InputError(f"cannot read header of {path}: {e}") from e


def _content_lines(text: str):
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield number, line


def parse_partition(text: str, names) -> Partition:
    """One block per line, comma-separated names, most upstream block first."""
    blocks = [[name.strip() for name in line.split(",") if name.strip()] for _, line in _content_lines(text)]
    if not blocks:
        raise PartitionError("partition file has no blocks")
    return Partition.from_names(blocks, names)


def read_partition_file(path, names) -> Partition:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read partition file {path}: {e}") from e
    return parse_partition(text, names)


def _resolve(token: str, lookup: dict[str, int] | None, where: str) -> int:
    """A known name, else a 1-based integer label."""
    if lookup is not None and token in lookup:
        return lookup[token]
    try:
        label = int(token)
    except ValueError as e:
        raise InputError(f"{where}: '{token}' is neither a known name nor a 1-based label") from e
    if label < 1 or (lookup is not None and label > len(lookup)):
        raise InputError(f"{where}: label {label} is out of range")
    return label - 1


def parse_edge_list(text: str, names=None) -> list[tuple[int, int]]:
    """'parent child' per line; names when `names` is given, otherwise 1-based labels."""
    lookup = {name: k for k, name in enumerate(names)} if names is not None else None
    edges = []
    for number, line in _content_lines(text):
        tokens = line.split()
        if len(tokens) < 2:
            raise InputError(f"line {number}: expected 'parent child', got '{line}'")
        where = f"line {number}"
        edges.append((_resolve(tokens[0], lookup, where), _resolve(tokens[1], lookup, where)))
    return edges


def read_network(path, p: int | None = None) -> tuple[list[tuple[int, int]], list[str]]:
    """True-network edge list with either 1-based labels or names.

    Returns 0-based edges and the variable names (labels as strings, or names
    in order of first appearance).
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read network file {path}: {e}") from e
    tokens = [t for _, line in _content_lines(text) for t in line.split()[:2]]
    if tokens and all(t.isdigit() for t in tokens):
        edges = parse_edge_list(text)
        size = max([max(u, v) + 1 for u, v in edges] + [p or 0])
        return edges, [str(k + 1) for k in range(size)]
    names = list(dict.fromkeys(tokens))
    if p is not None and p > len(names):
        raise InputError(f"named network has {len(names)} nodes; cannot pad to {p}")
    return parse_edge_list(text, names), names


def read_known_edges(path) -> list[KnownEdge]:
    """'parent child [+|-]' per line, names as in the data header."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read known-edge file {path}: {e}") from e
    known = []
    for number, line in _content_lines(text):
        tokens = line.split()
        if len(tokens) not in (2, 3) or (len(tokens) == 3 and tokens[2] not in ("+", "-")):
            raise InputError(f"line {number}: expected 'parent child [+|-]', got '{line}'")
        sign = None if len(tokens) == 2 else (1 if tokens[2] == "+" else -1)
        known.append(KnownEdge(parent=tokens[0], child=tokens[1], sign=sign))
    return known


def read_truth_edges(path, names) -> list[tuple[int, int]]:
    """'parent child' per line against the data header, as 0-based edges."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read truth file {path}: {e}") from e
    return parse_edge_list(text, names)


def format_weight(weight: float) -> str:
    return f"{weight:.10g}"


def write_edges_tsv(path, edges: list[Edge], names) -> None:
    """parent<TAB>child<TAB>weight, weights with 10 significant digits."""
    lines = [f"{names[e.parent]}\t{names[e.child]}\t{format_weight(e.weight)}\n" for e in edges]
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_estimate_tsv(path, names) -> np.ndarray:
    """Rebuild a factor-shaped matrix (unit diagonal) from an edges.tsv file."""
    lookup = {name: k for k, name in enumerate(names)}
    B = np.eye(len(names))
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read estimate file {path}: {e}") from e
    for number, line in _content_lines(text):
        fields = line.split("\t")
        if len(fields) != 3:
            raise InputError(f"{path} line {number}: expected parent<TAB>child<TAB>weight")
        parent = _resolve(fields[0], lookup, f"{path} line {number}")
        child = _resolve(fields[1], lookup, f"{path} line {number}")
        B[child, parent] = float(fields[2])
    return B


def write_json(path, payload) -> None:
    """Stable JSON: sorted keys, fixed indentation, trailing newline."""
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read JSON file {path}: {e}") from e
