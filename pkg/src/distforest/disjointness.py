"""
Edge-sharing tests on restricted trees, sharing-graph components and the
forest-count bound.
"""

from __future__ import annotations

from typing import Dict, FrozenSet, Iterable, List, Set, Tuple

from .errors import InvalidTarget, LabelMismatch
from .tree_core import Edge, Tree, canonical_edge


def edge_on_leafpath(t: Tree, e: Edge, l: Iterable[str]) -> bool:
    """Whether edge ``e`` lies on the path between two leaves of ``l``."""
    e = canonical_edge(*e)
    masks = t.side_masks()
    if e not in masks:
        raise InvalidTarget(f"edge {e} is not in the tree")
    side = masks[e]
    m = t.mask_of(l)
    return bool(m & side) and bool(m & ~side)


def edge_sharing(t12: Tree, l1: Iterable[str], l2: Iterable[str]) -> bool:
    """Whether ``T|l1`` and ``T|l2`` share an edge, tested inside ``t12``.

    ``t12`` must be a tree on exactly ``l1 | l2``.
    """
    l1 = frozenset(l1)
    l2 = frozenset(l2)
    if t12.labels != l1 | l2:
        raise LabelMismatch("the union tree must have leaf set l1 | l2")
    m1 = t12.mask_of(l1)
    m2 = t12.mask_of(l2)
    full = t12.full_mask()
    for side in t12.side_masks().values():
        other = full ^ side
        if m1 & side and m1 & other and m2 & side and m2 & other:
            return True
    return False


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        root = x
        parent = self.parent
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


class SharingGraph:
    """Symmetric, irreflexive relation on ``0..n-1``."""

    def __init__(self, n: int, pairs: Iterable[Tuple[int, int]] = ()):
        self.n = n
        self._adj: List[Set[int]] = [set() for _ in range(n)]
        for a, b in pairs:
            self.add(a, b)

    def add(self, a: int, b: int) -> None:
        if a == b:
            raise ValueError("sharing graph is irreflexive")
        if not (0 <= a < self.n and 0 <= b < self.n):
            raise IndexError("vertex out of range")
        self._adj[a].add(b)
        self._adj[b].add(a)

    def neighbors(self, a: int) -> FrozenSet[int]:
        return frozenset(self._adj[a])

    def has_edge(self, a: int, b: int) -> bool:
        return b in self._adj[a]

    def edges(self) -> List[Tuple[int, int]]:
        return sorted((a, b) for a in range(self.n) for b in self._adj[a] if a < b)


def connected_components(g: SharingGraph) -> List[List[int]]:
    """Components as sorted index lists, ordered by smallest index."""
    uf = UnionFind(g.n)
    for a, b in g.edges():
        uf.union(a, b)
    groups: Dict[int, List[int]] = {}
    for v in range(g.n):
        groups.setdefault(uf.find(v), []).append(v)
    return sorted(groups.values(), key=lambda c: c[0])


def forest_count_bound(n: int, r: int) -> int:
    """``floor(1 + 30 * 2**-r * n)``, computed in exact integer arithmetic."""
    if n < 1 or r < 0:
        raise ValueError("need n >= 1 and r >= 0")
    return 1 + (30 * n) // (2 ** r)
