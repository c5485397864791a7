"""
Tree reconstruction from a finite, accurate distance table (4-point method).

Leaves are inserted one at a time.  To place a new leaf ``x`` we walk the
current tree from an internal node; at each node one quartet query against
one representative leaf per branch says which branch leads to the place
where ``x`` belongs.  Edge lengths are computed afterwards from the final
topology with fixed witnesses.
"""

from __future__ import annotations

import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import AmbiguousQuartet, InfiniteEntry, NonPositiveLength, UnknownLabel
from .metric_space import LeafMetric, WeightedTree
from .tree_core import Split, Tree

# clamp value used for non-positive lengths in best-effort mode
MIN_LENGTH = 1e-9


def quartet_topology(dh: LeafMetric, q: Sequence[str]) -> Split:
    """The pairing ``ab|cd`` with the strictly smallest pair-sum.

    Raises
    ------
    InfiniteEntry
        One of the six distances is ``inf``.
    AmbiguousQuartet
        The smallest pair-sum is not unique.
    """
    a, b, c, d = q
    k = _quartet_choice(dh.rows(), *(dh.index(x) for x in q), strict=True, names=q)
    pairs = ((a, b, c, d), (a, c, b, d), (a, d, b, c))[k]
    return Split(frozenset(pairs[:2]), frozenset(pairs[2:]))


def _quartet_choice(D, i, j, k, l, strict=True, names=None) -> int:
    """0 for ij|kl, 1 for ik|jl, 2 for il|jk."""
    s = (D[i][j] + D[k][l], D[i][k] + D[j][l], D[i][l] + D[j][k])
    if math.isinf(max(s)):
        raise InfiniteEntry(f"infinite distance inside quartet {names or (i, j, k, l)}")
    best = min(s)
    winners = [t for t in range(3) if s[t] == best]
    if len(winners) > 1 and strict:
        raise AmbiguousQuartet(f"tied pair-sums {s} for quartet {names or (i, j, k, l)}")
    return winners[0]


class _Growing:
    """Mutable tree under construction: leaves are metric indices."""

    def __init__(self, names: List[str]):
        self.names = names
        self.adj: Dict[int, List[int]] = {}
        self.next_id = len(names)

    def is_leaf(self, v: int) -> bool:
        return v < len(self.names)

    def new_internal(self) -> int:
        v = self.next_id
        self.next_id += 1
        self.adj[v] = []
        return v

    def link(self, a: int, b: int) -> None:
        self.adj.setdefault(a, []).append(b)
        self.adj.setdefault(b, []).append(a)

    def unlink(self, a: int, b: int) -> None:
        self.adj[a].remove(b)
        self.adj[b].remove(a)

    def nearest_leaf(self, start: int, avoid: int) -> int:
        """Closest leaf (edge count, then label) reached from ``start``
        without crossing ``avoid``."""
        if self.is_leaf(start):
            return start
        names = self.names
        seen = {avoid, start}
        frontier = [start]
        while frontier:
            nxt = []
            found = []
            for v in frontier:
                for w in self.adj[v]:
                    if w not in seen:
                        seen.add(w)
                        if self.is_leaf(w):
                            found.append(w)
                        else:
                            nxt.append(w)
            if found:
                return min(found, key=lambda w: names[w])
            frontier = nxt
        raise AssertionError("branch without leaves")


def _insert(g: _Growing, D, x: int, strict: bool) -> None:
    # start at any internal node
    start = next(v for v in g.adj if not g.is_leaf(v))
    prev = None
    cur = start
    while True:
        branches = [w for w in g.adj[cur]]
        if prev is not None:
            branches.remove(prev)
            branches.insert(0, prev)
        reps = [g.nearest_leaf(w, cur) for w in branches]
        k = _quartet_choice(D, x, reps[0], reps[1], reps[2], strict=strict, names=None)
        # k: 0 -> x pairs with reps[0], 1 -> reps[1], 2 -> reps[2]
        if prev is not None and k == 0:
            a, b = prev, cur
            break
        nxt = branches[k]
        if g.is_leaf(nxt):
            a, b = cur, nxt
            break
        prev, cur = cur, nxt
    w = g.new_internal()
    g.unlink(a, b)
    g.link(a, w)
    g.link(w, b)
    g.link(w, x)


def _topology(dh: LeafMetric, order: List[str], strict: bool) -> _Growing:
    D = dh.rows()
    names = list(order)
    idx = [dh.index(x) for x in names]
    # local distance table in insertion order
    L = [[D[i][j] for j in idx] for i in idx]
    for row in L:
        for v in row:
            if math.isinf(v):
                raise InfiniteEntry("infinite distance among the leaves to reconstruct")
    g = _Growing(names)
    n = len(names)
    if n == 1:
        g.adj[0] = []
        return g
    if n == 2:
        g.link(0, 1)
        return g
    c = g.new_internal()
    for i in range(3):
        g.link(c, i)
    for x in range(3, n):
        _insert(g, L, x, strict)
    g.L = L
    return g


def _witnesses(g: _Growing) -> Dict[Tuple[int, int], int]:
    """Nearest leaf behind each directed edge ``(a, b)`` (on b's side)."""
    adj = g.adj
    names = g.names
    root = 0
    parent = {root: None}
    order = [root]
    for v in order:
        for w in adj[v]:
            if w not in parent:
                parent[w] = v
                order.append(w)
    best: Dict[Tuple[int, int], Tuple[int, str, int]] = {}

    def combine(a, b):
        # nearest leaf entering b from a
        if g.is_leaf(b):
            return (1, names[b], b)
        cands = [best[(b, c)] for c in adj[b] if c != a]
        d, lab, leaf = min(cands)
        return (d + 1, lab, leaf)

    for v in reversed(order):
        p = parent[v]
        if p is not None:
            best[(p, v)] = combine(p, v)
    for v in order:
        for w in adj[v]:
            if w == parent[v]:
                continue
            best[(w, v)] = combine(w, v)
    return {k: val[2] for k, val in best.items()}


def build_tree(
    dh: LeafMetric,
    labels: Optional[Iterable[str]] = None,
    best_effort: bool = False,
    insertion_order: Optional[Sequence[str]] = None,
) -> WeightedTree:
    """Reconstruct the weighted tree on ``labels`` from ``dh``.

    Parameters
    ----------
    dh : LeafMetric
        Distance table; every entry among ``labels`` must be finite.
    labels : iterable of str, optional
        Leaves to reconstruct.  Defaults to all labels of ``dh``.
    best_effort : bool
        Break quartet ties by label order and clamp non-positive lengths
        instead of raising.
    insertion_order : sequence of str, optional
        Order of leaf insertion; defaults to sorted labels.  The resulting
        topology does not depend on it when all quartet queries are sound.

    Returns
    -------
    WeightedTree

    Raises
    ------
    InfiniteEntry, AmbiguousQuartet, NonPositiveLength
    """
    labs = set(dh.labels if labels is None else labels)
    if not labs:
        raise UnknownLabel("cannot build a tree on no leaves")
    for x in labs:
        dh.index(x)
    if insertion_order is None:
        order = sorted(labs)
    else:
        order = list(insertion_order)
        if set(order) != labs or len(order) != len(labs):
            raise UnknownLabel("insertion order must list each label once")
    g = _topology(dh, order, strict=not best_effort)
    n = len(order)
    labels_map = {i: order[i] for i in range(n)}
    adj = {v: list(ws) for v, ws in g.adj.items()}
    tree = Tree(adj, labels_map)
    if n == 1:
        return WeightedTree(tree, {})
    L = g.L if n >= 3 else [[dh(order[i], order[j]) for j in range(n)] for i in range(n)]
    if n == 2:
        if math.isinf(L[0][1]):
            raise InfiniteEntry("infinite distance among the leaves to reconstruct")
        return WeightedTree(tree, {(0, 1): _positive(L[0][1], (0, 1), order, best_effort)})
    wit = _witnesses(g)
    lengths = {}
    for a, b in tree.edges:
        if g.is_leaf(a) or g.is_leaf(b):
            u, c = (a, b) if g.is_leaf(a) else (b, a)
            w, x = (wit[(c, y)] for y in adj[c] if y != u)
            val = (L[u][w] + L[u][x] - L[w][x]) / 2
        else:
            u, v = (wit[(a, y)] for y in adj[a] if y != b)
            w, x = (wit[(b, y)] for y in adj[b] if y != a)
            val = (L[u][w] + L[v][x] - L[u][v] - L[w][x]) / 2
        lengths[(a, b)] = _positive(val, (a, b), order, best_effort)
    return WeightedTree(tree, lengths)


def _positive(val: float, e, order, best_effort: bool) -> float:
    if val > 0:
        return val
    if best_effort:
        return MIN_LENGTH
    raise NonPositiveLength(f"non-positive estimated length {val:.6g} on edge {e}")
