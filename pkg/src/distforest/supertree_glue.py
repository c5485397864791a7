"""
Gluing an edge-sharing collection of local trees into one supertree.

Each local tree ``T|SL_b`` covers the leaf set ``L_b`` together with the
leaf sets of its sharing neighbours.  An edge of ``T|SL_b`` lying on a path
between two leaves of ``L_b`` extends to a unique split of the union ``L'``;
the extension is computed layer by layer over the sharing graph, assigning
each further leaf set wholly to one side.  The union tree is rebuilt from the
extended splits.

All set work is done with integer bitmasks over the sorted labels of ``L'``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

from .disjointness import UnionFind
from .errors import (
    EdgeIdentificationAmbiguous,
    GlueError,
    IncompatibleSplits,
    IncompleteSplits,
    InconsistentLocalTrees,
    InvalidTarget,
    LabelMismatch,
)
from .metric_space import WeightedTree
from .tree_core import Edge, Split, Tree, canonical_edge, tree_from_masks

from .errors import SideConflict


class SharingCollection:
    """Leaf sets, their sharing neighbourhoods and the local trees.

    Parameters
    ----------
    leaf_sets : sequence of label sets
        ``L_0 .. L_{a-1}``.
    neighborhoods : sequence of index sets
        ``S(b)``: indices whose restricted trees share an edge with ``T|L_b``.
        Must contain ``b`` and be symmetric.
    local_trees : sequence of WeightedTree
        ``local_trees[b]`` is a tree on ``SL_b``, the union of ``L_g`` over
        ``g`` in ``S(b)``.
    """

    def __init__(self, leaf_sets, neighborhoods, local_trees):
        self.leaf_sets: Tuple[FrozenSet[str], ...] = tuple(frozenset(x) for x in leaf_sets)
        self.neighborhoods: Tuple[FrozenSet[int], ...] = tuple(frozenset(x) for x in neighborhoods)
        self.local_trees: Tuple[WeightedTree, ...] = tuple(local_trees)
        a = len(self.leaf_sets)
        if a == 0:
            raise GlueError("empty collection")
        if len(self.neighborhoods) != a or len(self.local_trees) != a:
            raise GlueError("leaf sets, neighbourhoods and local trees differ in number")
        for b, nb in enumerate(self.neighborhoods):
            if b not in nb:
                raise GlueError(f"index {b} is missing from its own neighbourhood")
            for g in nb:
                if not 0 <= g < a:
                    raise GlueError(f"neighbour index {g} out of range")
                if b not in self.neighborhoods[g]:
                    raise GlueError(f"sharing relation is not symmetric at ({b},{g})")
        uf = UnionFind(a)
        for b, nb in enumerate(self.neighborhoods):
            for g in nb:
                uf.union(b, g)
        if len({uf.find(b) for b in range(a)}) != 1:
            raise GlueError("the sharing graph of the collection is not connected")
        for b in range(a):
            sl = self.shared_leaves(b)
            if self.local_trees[b].tree.labels != sl:
                raise LabelMismatch(f"local tree {b} is not on the union of its neighbourhood")
        self.labels: Tuple[str, ...] = tuple(sorted(frozenset().union(*self.leaf_sets)))
        self._bit = {lab: i for i, lab in enumerate(self.labels)}
        self._cache: Dict = {}

    def __len__(self) -> int:
        return len(self.leaf_sets)

    def shared_leaves(self, b: int) -> FrozenSet[str]:
        return frozenset().union(*(self.leaf_sets[g] for g in self.neighborhoods[b]))

    # -- masks ---------------------------------------------------------------

    def mask(self, labels) -> int:
        bit = self._bit
        m = 0
        for lab in labels:
            m |= 1 << bit[lab]
        return m

    @property
    def full_mask(self) -> int:
        return (1 << len(self.labels)) - 1

    def set_mask(self, b: int) -> int:
        key = ("L", b)
        if key not in self._cache:
            self._cache[key] = self.mask(self.leaf_sets[b])
        return self._cache[key]

    def shared_mask(self, b: int) -> int:
        key = ("SL", b)
        if key not in self._cache:
            self._cache[key] = self.mask(self.shared_leaves(b))
        return self._cache[key]

    def local_sides(self, b: int) -> Dict[Edge, int]:
        """Global mask of the ``edge[1]`` side of every edge of local tree ``b``."""
        key = ("sides", b)
        if key not in self._cache:
            t = self.local_trees[b].tree
            order = sorted(t.labels)
            gbits = [1 << self._bit[lab] for lab in order]
            out = {}
            for e, m in t.side_masks().items():
                g = 0
                i = 0
                while m:
                    if m & 1:
                        g |= gbits[i]
                    m >>= 1
                    i += 1
                out[e] = g
            self._cache[key] = out
        return self._cache[key]

    def labels_of(self, mask: int) -> FrozenSet[str]:
        return frozenset(lab for i, lab in enumerate(self.labels) if mask >> i & 1)


def layers(c: SharingCollection, beta: int) -> List[List[int]]:
    """``S_0(b) = S(b)``, then successive unseen sharing neighbours."""
    seen = set(c.neighborhoods[beta])
    out = [sorted(seen)]
    frontier = out[0]
    while True:
        nxt = set()
        for d in frontier:
            nxt |= c.neighborhoods[d]
        nxt -= seen
        if not nxt:
            return out
        seen |= nxt
        frontier = sorted(nxt)
        out.append(frontier)


def candidate_edges(c: SharingCollection, beta: int) -> List[Edge]:
    """Edges of local tree ``beta`` on a path between two leaves of ``L_beta``."""
    lm = c.set_mask(beta)
    full = c.shared_mask(beta)
    return [
        e for e, s in sorted(c.local_sides(beta).items()) if lm & s and lm & (full ^ s)
    ]


def _straddle_side(c: SharingCollection, beta: int, a0: int, delta: int, gmask: int) -> Optional[str]:
    """Side of ``L_gamma`` found through local tree ``delta``, which contains
    both ``L_beta`` and ``L_gamma``; None when the edge cannot be pinned down."""
    key = ("loc", beta, a0, delta)
    cands = c._cache.get(key)
    if cands is None:
        sl_b = c.shared_mask(beta)
        sl_d = c.shared_mask(delta)
        common = sl_b & sl_d
        lb = c.set_mask(beta)
        ta = a0 & common
        tb = (sl_b ^ a0) & common
        cands = []
        for s in c.local_sides(delta).values():
            o = sl_d ^ s
            if not (lb & s and lb & o):
                continue
            if s & common == ta and o & common == tb:
                cands.append(s)
            elif o & common == ta and s & common == tb:
                cands.append(o)
        c._cache[key] = cands
    if not cands:
        raise EdgeIdentificationAmbiguous(
            f"edge of local tree {beta} has no counterpart in local tree {delta}"
        )
    sides = set()
    for a_side in cands:
        if gmask & a_side == gmask:
            sides.add("A")
        elif gmask & a_side == 0:
            sides.add("B")
        else:
            sides.add("?")
    if len(sides) == 1 and "?" not in sides:
        return sides.pop()
    if len(cands) == 1:
        raise SideConflict(f"leaf set straddles the extended edge inside local tree {delta}")
    return None


def _extend_masks(c: SharingCollection, beta: int, a0: int) -> Tuple[int, int]:
    sl = c.shared_mask(beta)
    b0 = sl ^ a0
    side: Dict[int, str] = {}
    for d in c.neighborhoods[beta]:
        m = c.set_mask(d)
        if m & a0 == m:
            side[d] = "A"
        elif m & b0 == m:
            side[d] = "B"
        else:
            side[d] = "S"
    a_mask, b_mask = a0, b0
    lay = layers(c, beta)
    for frontier in lay[1:]:
        add_a = add_b = 0
        new = {}
        for g in frontier:
            gm = c.set_mask(g)
            votes = set()
            ambiguous = False
            for d in sorted(c.neighborhoods[g]):
                s = side.get(d)
                if s is None:
                    continue
                if s == "S":
                    s = _straddle_side(c, beta, a0, d, gm)
                    if s is None:
                        ambiguous = True
                        continue
                votes.add(s)
            if len(votes) > 1:
                raise SideConflict(f"leaf set {g} is witnessed on both sides of an edge of local tree {beta}")
            if not votes:
                if ambiguous:
                    raise EdgeIdentificationAmbiguous(
                        f"no unambiguous witness places leaf set {g} for local tree {beta}"
                    )
                raise GlueError(f"leaf set {g} has no witness in earlier layers")
            v = votes.pop()
            new[g] = v
            if v == "A":
                add_a |= gm
            else:
                add_b |= gm
        side.update(new)
        a_mask |= add_a
        b_mask |= add_b
    if a_mask & b_mask:
        raise SideConflict(f"extended sides overlap for an edge of local tree {beta}")
    if a_mask & sl != a0 or b_mask & sl != b0:
        raise SideConflict(f"extension of an edge of local tree {beta} disagrees with the local tree")
    if a_mask | b_mask != c.full_mask:
        raise GlueError("extension does not cover the union leaf set")
    return a_mask, b_mask


def extend_split(c: SharingCollection, beta: int, e: Edge) -> Split:
    """The split of ``L'`` extending edge ``e`` of local tree ``beta``."""
    e = canonical_edge(*e)
    sides = c.local_sides(beta)
    if e not in sides:
        raise InvalidTarget(f"edge {e} is not in local tree {beta}")
    lm = c.set_mask(beta)
    s = sides[e]
    if not (lm & s and lm & (c.shared_mask(beta) ^ s)):
        raise InvalidTarget(f"edge {e} is not on a path between leaves of set {beta}")
    a, b = _extend_masks(c, beta, s)
    return Split(c.labels_of(a), c.labels_of(b))


@dataclass
class GlueResult:
    tree: WeightedTree
    flags: List[str] = field(default_factory=list)


def glue_report(c: SharingCollection, eps: Optional[float] = None) -> GlueResult:
    """Glue the collection; also report length disagreements above ``4*eps``."""
    labels = c.labels
    full = c.full_mask
    if len(labels) == 1:
        return GlueResult(c.local_trees[0] if len(c) == 1 else _single(labels[0]))
    found: Dict[int, List[float]] = {}  # normalized split mask -> length samples
    for beta in range(len(c)):
        sl = c.shared_mask(beta)
        low = sl & -sl
        traces = {}
        for x in found:
            t = x & sl
            if t & low:
                t = sl ^ t
            if t and t != sl:
                traces[t] = x
        wt = c.local_trees[beta]
        sides = c.local_sides(beta)
        for e in candidate_edges(c, beta):
            s = sides[e]
            t = sl ^ s if s & low else s
            x = traces.get(t)
            if x is None:
                a, b = _extend_masks(c, beta, s)
                x = a if not a & 1 else b
                traces[t] = x
                found.setdefault(x, [])
            found[x].append(wt.length(*e))
    try:
        tree = tree_from_masks(list(found), labels)
    except (IncompatibleSplits, IncompleteSplits) as exc:
        raise InconsistentLocalTrees(f"extended splits do not form a binary tree: {exc}") from exc
    flags = []
    lengths = {}
    for e, m in tree.side_masks().items():
        x = m if not m & 1 else full ^ m
        vals = found.get(x)
        if not vals:
            raise InconsistentLocalTrees("a glued edge has no source edge in any local tree")
        lengths[e] = sum(vals) / len(vals)
        if eps is not None and max(vals) - min(vals) > 4 * eps:
            flags.append(
                f"length spread {max(vals) - min(vals):.4g} exceeds 4*eps on split "
                f"{','.join(sorted(c.labels_of(x)))}"
            )
    _check_restrictions(c, tree)
    return GlueResult(WeightedTree(tree, lengths), flags)


def glue(c: SharingCollection) -> WeightedTree:
    """The supertree on ``L'``; its topology restricts to every local tree."""
    return glue_report(c).tree


def _single(label: str) -> WeightedTree:
    return WeightedTree(Tree({0: ()}, {0: label}), {})


def _check_restrictions(c: SharingCollection, tree: Tree) -> None:
    masks = list(tree.side_masks().values())
    for beta in range(len(c)):
        sl = c.shared_mask(beta)
        low = sl & -sl

        def norm(t):
            return sl ^ t if t & low else t

        got = set()
        for m in masks:
            t = m & sl
            if t and t != sl:
                got.add(norm(t))
        want = {norm(s) for s in c.local_sides(beta).values()}
        if got != want:
            raise InconsistentLocalTrees(f"glued tree does not restrict to local tree {beta}")
