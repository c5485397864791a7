"""
Leaf-labeled unrooted binary trees, splits, restrictions and edge adding.

Trees are immutable.  Node identifiers are private integers; two trees are
considered the same topology when their split sets over leaf labels agree
(see :func:`same_topology`).  Internally many routines work on integer
bitmasks over the sorted label list of a tree, which keeps the hot loops
free of set allocation.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import (
    IncompatibleSplits,
    IncompleteSplits,
    InvalidTarget,
    InvalidTree,
    UnknownLabel,
)

Edge = Tuple[int, int]


def canonical_edge(a: int, b: int) -> Edge:
    return (a, b) if a < b else (b, a)


class Tree:
    """An unrooted tree whose internal nodes have degree 3.

    Parameters
    ----------
    adjacency : mapping node -> iterable of neighbour nodes
        Must describe a connected acyclic graph.  Every node is listed.
    leaf_labels : mapping leaf node -> label
        Exactly the nodes of degree <= 1 are labeled; labels are unique.
    """

    __slots__ = ("_adj", "_label_of", "_node_of", "_edges", "_sides", "_masks", "_bits")

    def __init__(self, adjacency: Mapping[int, Iterable[int]], leaf_labels: Mapping[int, str]):
        adj = {int(v): tuple(sorted(int(w) for w in nbrs)) for v, nbrs in adjacency.items()}
        label_of = {int(v): str(lab) for v, lab in leaf_labels.items()}
        self._adj: Dict[int, Tuple[int, ...]] = adj
        self._label_of: Dict[int, str] = label_of
        self._node_of: Dict[str, int] = {lab: v for v, lab in label_of.items()}
        self._edges: Optional[Tuple[Edge, ...]] = None
        self._sides = None
        self._masks = None
        self._bits = None
        self._validate()

    def _validate(self) -> None:
        adj = self._adj
        if not adj:
            raise InvalidTree("a tree needs at least one node")
        if len(self._node_of) != len(self._label_of):
            raise InvalidTree("leaf labels must be unique")
        n_half_edges = 0
        for v, nbrs in adj.items():
            if len(set(nbrs)) != len(nbrs) or v in nbrs:
                raise InvalidTree(f"node {v} has repeated neighbours or a self loop")
            for w in nbrs:
                if w not in adj or v not in adj[w]:
                    raise InvalidTree(f"edge ({v},{w}) is not symmetric")
            deg = len(nbrs)
            n_half_edges += deg
            if deg <= 1:
                if v not in self._label_of:
                    raise InvalidTree(f"leaf node {v} carries no label")
            else:
                if v in self._label_of:
                    raise InvalidTree(f"internal node {v} carries a label")
                if deg != 3:
                    raise InvalidTree(f"internal node {v} has degree {deg}")
        for v in self._label_of:
            if v not in adj:
                raise InvalidTree(f"labeled node {v} is not in the tree")
        if n_half_edges // 2 != len(adj) - 1:
            raise InvalidTree("a tree on k nodes has k-1 edges")
        start = next(iter(adj))
        seen = {start}
        stack = [start]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) != len(adj):
            raise InvalidTree("tree is not connected")

    # -- basic accessors -------------------------------------------------------

    @property
    def nodes(self) -> Tuple[int, ...]:
        return tuple(self._adj)

    @property
    def edges(self) -> Tuple[Edge, ...]:
        if self._edges is None:
            self._edges = tuple(
                sorted((v, w) for v, nbrs in self._adj.items() for w in nbrs if v < w)
            )
        return self._edges

    @property
    def labels(self) -> FrozenSet[str]:
        return frozenset(self._node_of)

    @property
    def n(self) -> int:
        return len(self._node_of)

    def neighbors(self, v: int) -> Tuple[int, ...]:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def is_leaf(self, v: int) -> bool:
        return v in self._label_of

    def label(self, v: int) -> Optional[str]:
        return self._label_of.get(v)

    def node(self, label: str) -> int:
        try:
            return self._node_of[label]
        except KeyError:
            raise UnknownLabel(f"unknown leaf label {label!r}") from None

    def has_edge(self, a: int, b: int) -> bool:
        return a in self._adj and b in self._adj[a]

    def adjacency(self) -> Dict[int, Tuple[int, ...]]:
        return dict(self._adj)

    def leaf_labels(self) -> Dict[int, str]:
        return dict(self._label_of)

    def __repr__(self) -> str:
        return f"Tree(n={self.n}, edges={len(self.edges)})"

    # -- cached split data -----------------------------------------------------

    def bits(self) -> Dict[str, int]:
        """Bit position of each label (sorted label order)."""
        if self._bits is None:
            self._bits = {lab: i for i, lab in enumerate(sorted(self._node_of))}
        return self._bits

    def full_mask(self) -> int:
        return (1 << self.n) - 1

    def mask_of(self, labels: Iterable[str]) -> int:
        bits = self.bits()
        m = 0
        for lab in labels:
            try:
                m |= 1 << bits[lab]
            except KeyError:
                raise UnknownLabel(f"unknown leaf label {lab!r}") from None
        return m

    def labels_of(self, mask: int) -> FrozenSet[str]:
        order = sorted(self._node_of)
        out = []
        i = 0
        while mask:
            if mask & 1:
                out.append(order[i])
            mask >>= 1
            i += 1
        return frozenset(out)

    def side_masks(self) -> Dict[Edge, int]:
        """For each edge ``(a, b)``, the label mask of the side containing ``b``."""
        if self._masks is None:
            adj = self._adj
            bits = self.bits()
            root = min(adj)
            parent = {root: None}
            order = [root]
            for v in order:
                for w in adj[v]:
                    if w not in parent:
                        parent[w] = v
                        order.append(w)
            sub: Dict[int, int] = {}
            for v in reversed(order):
                m = 0
                lab = self._label_of.get(v)
                if lab is not None:
                    m = 1 << bits[lab]
                for w in adj[v]:
                    if w != parent[v]:
                        m |= sub[w]
                sub[v] = m
            full = self.full_mask()
            masks = {}
            for v in order[1:]:
                p = parent[v]
                if p < v:
                    masks[(p, v)] = sub[v]
                else:
                    masks[(v, p)] = full ^ sub[v]
            self._masks = masks
        return self._masks

    def edge_sides(self) -> Dict[Edge, FrozenSet[str]]:
        """For each edge ``(a, b)``, the labels on the side containing ``b``."""
        if self._sides is None:
            self._sides = {e: self.labels_of(m) for e, m in self.side_masks().items()}
        return self._sides


# -- splits ------------------------------------------------------------------


@dataclass(frozen=True)
class Split:
    """An unordered bipartition ``A|B`` of a leaf set.

    The side holding the smallest label is stored as ``side_a`` so that
    ``Split(A, B) == Split(B, A)``.
    """

    side_a: FrozenSet[str]
    side_b: FrozenSet[str]

    def __post_init__(self):
        a = frozenset(self.side_a)
        b = frozenset(self.side_b)
        if not a or not b:
            raise ValueError("both sides of a split must be nonempty")
        if a & b:
            raise ValueError("sides of a split must be disjoint")
        if min(b) < min(a):
            a, b = b, a
        object.__setattr__(self, "side_a", a)
        object.__setattr__(self, "side_b", b)

    @property
    def leaves(self) -> FrozenSet[str]:
        return self.side_a | self.side_b

    @property
    def is_trivial(self) -> bool:
        return len(self.side_a) == 1 or len(self.side_b) == 1

    def restricted(self, labels: Iterable[str]) -> Optional["Split"]:
        """The trace ``A∩L | B∩L``, or None when one side becomes empty."""
        lab = frozenset(labels)
        a = self.side_a & lab
        b = self.side_b & lab
        if not a or not b:
            return None
        return Split(a, b)

    def compatible(self, other: "Split") -> bool:
        return not (
            self.side_a & other.side_a
            and self.side_a & other.side_b
            and self.side_b & other.side_a
            and self.side_b & other.side_b
        )

    def __str__(self) -> str:
        return ",".join(sorted(self.side_a)) + "|" + ",".join(sorted(self.side_b))


def splits(t: Tree) -> FrozenSet[Split]:
    """One split per edge: the leaf bipartition left after deleting it."""
    full = t.labels
    return frozenset(Split(side, full - side) for side in t.edge_sides().values())


def edge_split(t: Tree, e: Edge) -> Split:
    e = canonical_edge(*e)
    try:
        side = t.edge_sides()[e]
    except KeyError:
        raise InvalidTarget(f"edge {e} is not in the tree") from None
    return Split(t.labels - side, side)


def same_topology(t1: Tree, t2: Tree) -> bool:
    return t1.labels == t2.labels and splits(t1) == splits(t2)


def tree_from_splits(s: Iterable[Split], labels: Iterable[str]) -> Tree:
    """Build the binary tree whose split set is ``s`` (trivial splits implied).

    Raises
    ------
    IncompatibleSplits
        Two splits cross, or a split does not cover ``labels``.
    IncompleteSplits
        The splits leave a node of degree greater than 3.
    """
    order = sorted(set(labels))
    if not order:
        raise IncompleteSplits("empty label set")
    bits = {lab: i for i, lab in enumerate(order)}
    full = (1 << len(order)) - 1
    masks = []
    for sp in s:
        try:
            ma = 0
            for lab in sp.side_a:
                ma |= 1 << bits[lab]
            mb = 0
            for lab in sp.side_b:
                mb |= 1 << bits[lab]
        except KeyError as exc:
            raise IncompatibleSplits(f"split {sp} uses label {exc.args[0]!r} outside the leaf set") from None
        if ma | mb != full:
            raise IncompatibleSplits(f"split {sp} does not cover the leaf set")
        masks.append(ma)
    return tree_from_masks(masks, order)


def tree_from_masks(side_masks: Iterable[int], order: Sequence[str]) -> Tree:
    """Mask-level core of :func:`tree_from_splits`.

    ``side_masks`` are one side of each split, as bitmasks over ``order``.
    """
    n = len(order)
    full = (1 << n) - 1
    if n == 1:
        return Tree({0: ()}, {0: order[0]})
    # clusters = split sides avoiding leaf 0; the tree is rooted at leaf 0
    clusters = set()
    for m in side_masks:
        c = m if not (m & 1) else full ^ m
        if c == 0 or c == full:
            raise IncompatibleSplits("split with an empty side")
        clusters.add(c)
    for i in range(1, n):
        clusters.add(1 << i)
    clusters.add(full ^ 1)
    cl = sorted(clusters, key=lambda c: (bin(c).count("1"), c))
    for i, x in enumerate(cl):
        for y in cl[i + 1:]:
            inter = x & y
            if inter and inter != x and inter != y:
                raise IncompatibleSplits("splits cross")
    parent_of = {}
    for i, x in enumerate(cl):
        for y in cl[i + 1:]:
            if x & y == x and x != y:
                parent_of[x] = y
                break
    top = full ^ 1
    children: Dict[int, List[int]] = {c: [] for c in cl}
    for c, p in parent_of.items():
        children[p].append(c)
    node_id = {c: i + 1 for i, c in enumerate(cl)}
    adj: Dict[int, List[int]] = {0: [node_id[top]]}
    labels = {0: order[0]}
    for c in cl:
        v = node_id[c]
        kids = children[c]
        if c & (c - 1) == 0:
            labels[v] = order[c.bit_length() - 1]
            if kids:
                raise IncompatibleSplits("singleton cluster with children")
        elif len(kids) != 2:
            raise IncompleteSplits(
                f"splits do not resolve a binary tree (node with {len(kids) + 1} neighbours)"
            )
        nbrs = [node_id[k] for k in kids]
        nbrs.append(node_id[parent_of[c]] if c != top else 0)
        adj[v] = nbrs
    return Tree(adj, labels)


# -- restriction and paths ---------------------------------------------------


def _restrict(t: Tree, keep: FrozenSet[str], lengths: Optional[Mapping[Edge, float]] = None):
    """Prune ``t`` to the subtree spanning ``keep`` and suppress degree-2 nodes.

    Returns ``(tree, merged_lengths_or_None)``.
    """
    keep_nodes = {t.node(lab) for lab in keep}
    if not keep_nodes:
        raise UnknownLabel("cannot restrict to an empty label set")
    root_label = min(keep)
    if len(keep_nodes) == 1:
        return Tree({0: ()}, {0: root_label}), ({} if lengths is not None else None)
    adj = t._adj
    root = t.node(root_label)
    parent = {root: None}
    order = [root]
    for v in order:
        for w in adj[v]:
            if w not in parent:
                parent[w] = v
                order.append(w)
    count = {}
    for v in reversed(order):
        c = 1 if v in keep_nodes else 0
        for w in adj[v]:
            if w != parent[v]:
                c += count[w]
        count[v] = c
    # kept children of each node (edges whose lower side holds a kept leaf)
    kids = {v: [w for w in adj[v] if w != parent[v] and count[w] > 0] for v in order if count[v] > 0 or v == root}
    new_id = {root: 0}
    new_adj: Dict[int, List[int]] = {0: []}
    new_lab = {0: root_label}
    new_len = {} if lengths is not None else None
    stack = [root]
    while stack:
        anchor = stack.pop()
        a = new_id[anchor]
        for child in kids[anchor]:
            total = 0.0
            prev, cur = anchor, child
            if lengths is not None:
                total += lengths[canonical_edge(prev, cur)]
            while cur not in keep_nodes and len(kids[cur]) == 1:
                prev, cur = cur, kids[cur][0]
                if lengths is not None:
                    total += lengths[canonical_edge(prev, cur)]
            b = len(new_id)
            new_id[cur] = b
            new_adj[b] = [a]
            new_adj[a].append(b)
            if cur in keep_nodes:
                new_lab[b] = t.label(cur)
            else:
                stack.append(cur)
            if new_len is not None:
                new_len[canonical_edge(a, b)] = total
    return Tree(new_adj, new_lab), new_len


def restrict(t: Tree, labels: Iterable[str]) -> Tree:
    """The restriction ``T|L``: span ``labels``, then suppress degree-2 nodes."""
    keep = frozenset(labels)
    return _restrict(t, keep)[0]


def leaf_path(t: Tree, u: str, v: str) -> List[Edge]:
    """Edges of the unique path from leaf ``u`` to leaf ``v``, in walking order."""
    a, b = t.node(u), t.node(v)
    if a == b:
        return []
    prev = {a: None}
    queue = deque([a])
    while queue:
        x = queue.popleft()
        if x == b:
            break
        for y in t._adj[x]:
            if y not in prev:
                prev[y] = x
                queue.append(y)
    path = []
    x = b
    while prev[x] is not None:
        path.append((prev[x], x))
        x = prev[x]
    path.reverse()
    return path


@dataclass(frozen=True)
class DirectedEdge:
    tail: int
    head: int

    @property
    def edge(self) -> Edge:
        return canonical_edge(self.tail, self.head)

    def reversed(self) -> "DirectedEdge":
        return DirectedEdge(self.head, self.tail)


def directed_edge_leaf_distance(t: Tree, e: DirectedEdge, targets: Optional[Iterable[str]] = None) -> int:
    """Edge count of the shortest simple path that starts with ``e`` (tail to
    head) and ends at a target leaf; the first edge is counted.

    ``targets`` defaults to all leaves.
    """
    if not t.has_edge(e.tail, e.head):
        raise InvalidTarget(f"{e} is not an edge of the tree")
    goal = {t.node(x) for x in (t.labels if targets is None else targets)}
    dist = {e.head: 1}
    queue = deque([e.head])
    while queue:
        x = queue.popleft()
        if x in goal:
            return dist[x]
        for y in t._adj[x]:
            if y != e.tail and y not in dist:
                dist[y] = dist[x] + 1
                queue.append(y)
    raise ValueError("no target leaf beyond the head of the edge")


def edge_leaf_distance(t: Tree, e: Edge, targets: Optional[Iterable[str]] = None) -> int:
    """The larger of the two directed distances of ``e``."""
    a, b = e
    return max(
        directed_edge_leaf_distance(t, DirectedEdge(a, b), targets),
        directed_edge_leaf_distance(t, DirectedEdge(b, a), targets),
    )


# -- forests and edge adding -------------------------------------------------


@dataclass(frozen=True)
class Forest:
    trees: Tuple[Tree, ...]

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        seen = set()
        for t in self.trees:
            if seen & t.labels:
                raise InvalidTree("forest trees must have disjoint leaf sets")
            seen |= t.labels

    @property
    def labels(self) -> FrozenSet[str]:
        return frozenset().union(*(t.labels for t in self.trees)) if self.trees else frozenset()

    def __len__(self) -> int:
        return len(self.trees)

    def component_of(self, label: str) -> int:
        for i, t in enumerate(self.trees):
            if label in t._node_of:
                return i
        raise InvalidTarget(f"label {label!r} is not in the forest")


@dataclass(frozen=True)
class JoinLeaves:
    """Connect two isolated leaves by an edge."""

    u: str
    v: str


@dataclass(frozen=True)
class AttachLeaf:
    """Subdivide an edge and hang an isolated leaf from the new node.

    The edge is named by the label set on one of its sides, within its tree.
    """

    edge: FrozenSet[str]
    leaf: str


@dataclass(frozen=True)
class BridgeEdges:
    """Subdivide two edges of different trees and join the new nodes."""

    edge1: FrozenSet[str]
    edge2: FrozenSet[str]


def _locate_edge(f: Forest, side: FrozenSet[str]) -> Tuple[int, Edge]:
    side = frozenset(side)
    if not side:
        raise InvalidTarget("edge reference is empty")
    i = f.component_of(next(iter(side)))
    t = f.trees[i]
    full = t.labels
    if not side <= full:
        raise InvalidTarget("edge reference spans several trees")
    for e, s in t.edge_sides().items():
        if s == side or full - s == side:
            return i, e
    raise InvalidTarget(f"no edge with side {sorted(side)}")


def _isolated(f: Forest, label: str) -> int:
    i = f.component_of(label)
    if f.trees[i].n != 1:
        raise InvalidTarget(f"leaf {label!r} is not isolated")
    return i


def _merge(trees: Sequence[Tree]):
    adj: Dict[int, List[int]] = {}
    labels: Dict[int, str] = {}
    offsets = []
    off = 0
    for t in trees:
        offsets.append(off)
        for v, nbrs in t._adj.items():
            adj[v + off] = [w + off for w in nbrs]
        for v, lab in t._label_of.items():
            labels[v + off] = lab
        off += max(t._adj) + 1
    return adj, labels, offsets, off


def _subdivide(adj, a: int, b: int, w: int) -> None:
    adj[a].remove(b)
    adj[b].remove(a)
    adj[a].append(w)
    adj[b].append(w)
    adj[w] = [a, b]


def apply_edge_add(f: Forest, op) -> Forest:
    """Apply one edge-adding operation; the result has one fewer tree."""
    if isinstance(op, JoinLeaves):
        i, j = _isolated(f, op.u), _isolated(f, op.v)
        if i == j:
            raise InvalidTarget("cannot join a leaf to itself")
        adj, labels, offs, _ = _merge([f.trees[i], f.trees[j]])
        a, b = offs[0], offs[1]
        adj[a].append(b)
        adj[b].append(a)
        parts = (i, j)
    elif isinstance(op, AttachLeaf):
        i, e = _locate_edge(f, op.edge)
        j = _isolated(f, op.leaf)
        adj, labels, offs, nxt = _merge([f.trees[i], f.trees[j]])
        w = nxt
        _subdivide(adj, e[0] + offs[0], e[1] + offs[0], w)
        leaf = offs[1]
        adj[w].append(leaf)
        adj[leaf].append(w)
        parts = (i, j)
    elif isinstance(op, BridgeEdges):
        i, e1 = _locate_edge(f, op.edge1)
        j, e2 = _locate_edge(f, op.edge2)
        if i == j:
            raise InvalidTarget("bridged edges must lie in different trees")
        adj, labels, offs, nxt = _merge([f.trees[i], f.trees[j]])
        w1, w2 = nxt, nxt + 1
        _subdivide(adj, e1[0] + offs[0], e1[1] + offs[0], w1)
        _subdivide(adj, e2[0] + offs[1], e2[1] + offs[1], w2)
        adj[w1].append(w2)
        adj[w2].append(w1)
        parts = (i, j)
    else:
        raise InvalidTarget(f"unknown edge-add descriptor {op!r}")
    merged = Tree(adj, labels)
    lo, hi = sorted(parts)
    trees = list(f.trees)
    trees[lo] = merged
    del trees[hi]
    return Forest(tuple(trees))
