"""Directed graphs implied by a Cholesky factor and acyclicity queries."""
import heapq
import logging

import numpy as np

from app.exceptions import CycleError, InputError, InvariantViolation
from app.models import CholeskyFactor, Edge

logger = logging.getLogger(__name__)


class DirectedGraph:
    """Directed graph on nodes 0..node_count-1 with on-demand reachability.

    Used for the within-block structure of one block row; edges are only
    committed when they keep the graph acyclic.
    """

    def __init__(self, node_count: int):
        self._children: list[set[int]] = [set() for _ in range(node_count)]

    def __len__(self) -> int:
        return len(self._children)

    @property
    def node_count(self) -> int:
        return len(self._children)

    def _validate_nodes(self, u: int, v: int) -> None:
        for k in (u, v):
            if not 0 <= k < len(self._children):
                raise InputError(f"node {k} is not in a graph of {len(self._children)} nodes")
        if u == v:
            raise InputError(f"self-loop query on node {u}")

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._children[u]

    def children(self, u: int) -> list[int]:
        return sorted(self._children[u])

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(len(self._children)) for v in sorted(self._children[u])]

    def path(self, source: int, target: int) -> list[int] | None:
        """Depth-first search for a directed path source -> ... -> target."""
        parent = {source: source}
        stack = [source]
        while stack:
            node = stack.pop()
            if node == target:
                walk = [node]
                while walk[-1] != source:
                    walk.append(parent[walk[-1]])
                return walk[::-1]
            for child in self._children[node]:
                if child not in parent:
                    parent[child] = node
                    stack.append(child)
        return None

    def reaches(self, source: int, target: int) -> bool:
        return self.path(source, target) is not None

    def creates_cycle(self, u: int, v: int) -> bool:
        """True iff adding u -> v closes a directed cycle, i.e. v already reaches u."""
        self._validate_nodes(u, v)
        if v in self._children[u]:
            return False
        return self.reaches(v, u)

    def add_edge(self, u: int, v: int) -> None:
        self._validate_nodes(u, v)
        if v in self._children[u]:
            return
        back = self.path(v, u)
        if back is not None:
            raise CycleError(
                f"edge {u} -> {v} closes the cycle " + " -> ".join(map(str, [u] + back)),
                cycle=[u] + back,
            )
        self._children[u].add(v)

    def remove_edge(self, u: int, v: int) -> None:
        self._children[u].discard(v)


def edges_of(B: CholeskyFactor | np.ndarray) -> list[Edge]:
    """Directed edges (parent, child, weight) of B, sorted by (parent, child).

    Nonzero B[i, j] (i != j) is the edge j -> i.
    """
    if isinstance(B, CholeskyFactor):
        return B.edges
    B = np.asarray(B, dtype=float)
    off = (B != 0) & ~np.eye(B.shape[0], dtype=bool)
    both = off & off.T
    if np.any(both):
        i, j = np.argwhere(both)[0]
        raise InvariantViolation(f"both B[{i + 1},{j + 1}] and B[{j + 1},{i + 1}] are nonzero")
    rows, cols = np.nonzero(off)
    return sorted(
        (Edge(int(j), int(i), float(B[i, j])) for i, j in zip(rows, cols)),
        key=lambda e: (e.parent, e.child),
    )


def _adjacency(edges, p: int) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(p)]
    for u, v in edges:
        if not (0 <= u < p and 0 <= v < p):
            raise InputError(f"edge {u + 1} -> {v + 1} refers to a node outside 1..{p}")
        if u == v:
            raise CycleError(f"self-loop on node {u + 1}", cycle=[u, u])
        adj[u].append(v)
    return adj


def find_cycle(edges, p: int) -> list[int] | None:
    """Return one directed cycle [a, b, ..., a] or None if the edge set is acyclic."""
    adj = _adjacency(edges, p)
    state = [0] * p  # 0 new, 1 on stack, 2 done
    for root in range(p):
        if state[root]:
            continue
        stack = [(root, iter(adj[root]))]
        trail = [root]
        state[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[node] = 2
                stack.pop()
                trail.pop()
            elif state[nxt] == 1:
                return trail[trail.index(nxt):] + [nxt]
            elif state[nxt] == 0:
                state[nxt] = 1
                stack.append((nxt, iter(adj[nxt])))
                trail.append(nxt)
    return None


def is_acyclic(edges, p: int) -> bool:
    return find_cycle(edges, p) is None


def topological_order(edges, p: int) -> list[int]:
    """Kahn's algorithm, smallest available node first (deterministic)."""
    adj = _adjacency(edges, p)
    indegree = [0] * p
    for targets in adj:
        for v in targets:
            indegree[v] += 1
    ready = [k for k in range(p) if indegree[k] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        u = heapq.heappop(ready)
        order.append(u)
        for v in adj[u]:
            indegree[v] -= 1
            if indegree[v] == 0:
                heapq.heappush(ready, v)
    if len(order) < p:
        cycle = find_cycle(edges, p)
        raise CycleError(
            "edge list is cyclic: " + " -> ".join(str(k + 1) for k in cycle), cycle=cycle
        )
    return order
