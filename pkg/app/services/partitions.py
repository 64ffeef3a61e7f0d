"""Partition builders over a topological order of the variables."""
import numpy as np

from app.data.partition_schemes import QUARTER_GROUPS
from app.exceptions import InputError, PartitionError
from app.models import Partition


def equal_blocks(order, R: int, names=None) -> Partition:
    """Split `order` into R contiguous blocks of near-equal size."""
    order = [int(k) for k in order]
    if not 1 <= R <= len(order):
        raise InputError(f"cannot split {len(order)} variables into {R} blocks")
    return Partition(blocks=tuple(tuple(int(k) for k in b) for b in np.array_split(order, R)), p=len(order), names=names)


def cut_blocks(order, cuts, names=None) -> Partition:
    """Contiguous blocks ending at the given 1-based positions of `order`."""
    order = [int(k) for k in order]
    edges = [0] + sorted(int(c) for c in cuts) + [len(order)]
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise InputError(f"cut positions {list(cuts)} must be strictly increasing inside 1..{len(order) - 1}")
    return Partition(
        blocks=tuple(tuple(order[a:b]) for a, b in zip(edges, edges[1:])), p=len(order), names=names
    )


def source_set_blocks(order, source, names=None) -> Partition:
    """Two blocks: the source set V (upstream), then its complement."""
    order = [int(k) for k in order]
    source = set(int(k) for k in source)
    if not source or not source < set(order):
        raise PartitionError("source set must be a non-empty proper subset of the variables")
    first = tuple(k for k in order if k in source)
    rest = tuple(k for k in order if k not in source)
    return Partition(blocks=(first, rest), p=len(order), names=names)


def merge_blocks(partition: Partition, groups) -> Partition:
    """Coarsen a partition; groups are consecutive runs of 0-based block indices."""
    flat = [r for g in groups for r in g]
    if flat != list(range(partition.R)):
        raise PartitionError(f"merge groups {groups} must list blocks 0..{partition.R - 1} in order")
    return Partition(
        blocks=tuple(tuple(k for r in g for k in partition.blocks[r]) for g in groups),
        p=partition.p,
        names=partition.names,
    )


def resolve_scheme(spec: str, order, names=None) -> Partition:
    """Build the named scheme (see PARTITION_SCHEMES) over a topological order."""
    order = [int(k) for k in order]
    key = spec.strip().upper()
    if key == "CCDR":
        return Partition(blocks=(tuple(order),), p=len(order), names=names)
    if key == "CSCS":
        return Partition.singletons(order, names=names)
    if key in QUARTER_GROUPS:
        return merge_blocks(equal_blocks(order, 4, names), QUARTER_GROUPS[key])
    try:
        if key.startswith("EQUAL-"):
            return equal_blocks(order, int(key[len("EQUAL-"):]), names)
        if key.startswith("CUTS:"):
            return cut_blocks(order, [int(c) for c in key[len("CUTS:"):].split(",")], names)
        if key.startswith("SOURCE:"):
            positions = [int(c) - 1 for c in key[len("SOURCE:"):].split(",")]
            return source_set_blocks(order, [order[k] for k in positions], names)
    except (ValueError, IndexError) as e:
        raise InputError(f"malformed partition scheme '{spec}': {e}") from e
    raise InputError(f"unknown partition scheme '{spec}'")
