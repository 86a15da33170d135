"""Directed communication topologies and their algebraic objects.

A :class:`Digraph` stores edges as ``(receiver, sender)`` ordered pairs with
1-based node labels: edge ``(i, j)`` means node ``i`` receives from node
``j``.  All matrix code in the package derives direction from this single
convention.  Adjacency and Laplacian matrices are exact integer arrays;
they are widened to floating point only where eigenvalue work begins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Edge = tuple[int, int]


@dataclass(frozen=True)
class Digraph:
    """Directed graph on nodes ``1..n`` with receiver-first edges.

    Invariants enforced at construction: no self-loops, all node labels in
    ``1..n``.  The edge set is a frozenset, so duplicates cannot occur and
    instances are hashable and safe to share between concurrent runs.
    """

    n: int
    edges: frozenset[Edge]

    def __init__(self, n: int, edges=()):
        if n < 1:
            raise ValueError(f"node count must be >= 1, got {n}")
        normalized = set()
        for e in edges:
            i, j = int(e[0]), int(e[1])
            if i == j:
                raise ValueError(f"self-loop ({i},{i}) is not allowed")
            if not (1 <= i <= n and 1 <= j <= n):
                raise ValueError(f"edge ({i},{j}) outside node range 1..{n}")
            normalized.add((i, j))
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "edges", frozenset(normalized))

    def in_neighbors(self, i: int) -> tuple[int, ...]:
        """Nodes that transmit to node ``i`` (its neighborhood set)."""
        return tuple(sorted(j for (r, j) in self.edges if r == i))

    @classmethod
    def from_dict(cls, d: dict) -> "Digraph":
        """Build from the JSON literal ``{"n": 5, "edges": [[1, 3], ...]}``."""
        return cls(d["n"], [tuple(e) for e in d.get("edges", [])])

    def to_dict(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in sorted(self.edges)]}


def adjacency(d: Digraph) -> np.ndarray:
    """Adjacency matrix: entry ``(i, j)`` is 1 exactly when ``(i, j)`` is an
    edge, i.e. when node ``i`` receives from node ``j``.  Integer dtype,
    zero diagonal."""
    a = np.zeros((d.n, d.n), dtype=np.int64)
    for (i, j) in d.edges:
        a[i - 1, j - 1] = 1
    return a


def laplacian(d: Digraph) -> np.ndarray:
    """In-degree Laplacian ``L = diag(in-degrees) - adjacency``.

    Row sums are exactly zero in integer arithmetic; off-diagonal entries
    are 0 or -1.
    """
    a = adjacency(d)
    return np.diag(a.sum(axis=1)) - a


def union_digraphs(ds: list[Digraph]) -> tuple[Digraph, np.ndarray]:
    """Union of a topology family.

    Returns the union digraph (edge sets merged) together with the
    entrywise *sum* of the individual Laplacians.  The two differ when an
    edge repeats across family members: the summed Laplacian counts it
    once per occurrence, the union digraph's own Laplacian counts it once.
    Both semantics are needed, so both are returned.
    """
    if not ds:
        raise ValueError("union of an empty topology list is undefined")
    n = ds[0].n
    for d in ds:
        if d.n != n:
            raise ValueError(f"node counts differ across family: {d.n} != {n}")
    merged = frozenset().union(*(d.edges for d in ds))
    summed = sum(laplacian(d) for d in ds)
    return Digraph(n, merged), summed


def contains_spanning_tree(d: Digraph) -> bool:
    """True iff some root node reaches every node along transmission
    direction.

    Edge ``(i, j)`` stores "i receives from j", so information flows
    ``j -> i``; reachability therefore follows reversed stored pairs.
    Plain repeated DFS, O(n*(n+|E|)), fine for the node counts used here.
    """
    out: dict[int, list[int]] = {j: [] for j in range(1, d.n + 1)}
    for (i, j) in d.edges:
        out[j].append(i)
    for root in range(1, d.n + 1):
        seen = {root}
        stack = [root]
        while stack:
            u = stack.pop()
            for w in out[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) == d.n:
            return True
    return False


def jointly_connected(ds: list[Digraph]) -> bool:
    """True iff the union of the family contains a directed spanning tree.

    Individual members may (and in the intended use, do) fail to contain
    one on their own.
    """
    union, _ = union_digraphs(ds)
    return contains_spanning_tree(union)
