"""
Brute-force oracles, instance generators and forest verification.

Everything here is deliberately naive: paths by depth-first search, splits
by deleting an edge and flooding, restrictions by intersecting split sides.
None of it calls the split/restriction/sharing code it is meant to check.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DistForestError, InvalidTarget, TooLarge
from .metric_space import DistortionParams, LeafMetric
from .tree_core import AttachLeaf, BridgeEdges, Forest, JoinLeaves, Tree, apply_edge_add


def default_labels(n: int) -> List[str]:
    if n <= 26:
        return [chr(ord("a") + i) for i in range(n)]
    width = len(str(n - 1))
    return [f"x{i:0{width}d}" for i in range(n)]


# -- tree generators -----------------------------------------------------------


def enumerate_trees(n: int, labels: Optional[Sequence[str]] = None) -> List[Tree]:
    """All binary trees on ``n`` labeled leaves, by inserting each new leaf on
    every edge of every smaller tree."""
    if n > 8:
        raise TooLarge("enumeration is limited to n <= 8")
    if n < 3:
        raise TooLarge("enumeration needs n >= 3")
    labs = list(labels) if labels is not None else default_labels(n)
    # edge lists; leaves are 0..n-1, internal nodes from n upward
    start = [(0, n), (1, n), (2, n)]
    shapes = [start]
    for leaf in range(3, n):
        nxt = []
        new_node = n + leaf - 2
        for edges in shapes:
            for i, (a, b) in enumerate(edges):
                rest = edges[:i] + edges[i + 1:]
                nxt.append(rest + [(a, new_node), (new_node, b), (leaf, new_node)])
        shapes = nxt
    out = []
    for edges in shapes:
        adj: Dict[int, List[int]] = {}
        for a, b in edges:
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, []).append(a)
        out.append(Tree(adj, {i: labs[i] for i in range(n)}))
    return out


def random_tree(n: int, rng: random.Random, labels: Optional[Sequence[str]] = None) -> Tree:
    """Uniformly random binary topology by stepwise random edge insertion,
    with labels assigned in random order."""
    labs = list(labels) if labels is not None else default_labels(n)
    labs = labs[:]
    rng.shuffle(labs)
    if n == 1:
        return Tree({0: []}, {0: labs[0]})
    edges = [(0, 1)]
    next_id = 2
    leaves = [0, 1]
    for _ in range(2, n):
        i = rng.randrange(len(edges))
        a, b = edges.pop(i)
        w, x = next_id, next_id + 1
        next_id += 2
        edges += [(a, w), (w, b), (w, x)]
        leaves.append(x)
    adj: Dict[int, List[int]] = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    return Tree(adj, {v: labs[i] for i, v in enumerate(leaves)})


def random_lengths(t: Tree, lo: float, hi: float, rng: random.Random) -> Dict[Tuple[int, int], float]:
    return {e: rng.uniform(lo, hi) for e in t.edges}


# -- naive path and split oracles ------------------------------------------------


def _adj(t: Tree) -> Dict[int, Tuple[int, ...]]:
    return {v: t.neighbors(v) for v in t.nodes}


def brute_path(t: Tree, u: str, v: str) -> List[FrozenSet[int]]:
    """Edges (as node pairs) on the path from ``u`` to ``v``, by DFS."""
    adj = _adj(t)
    src, dst = t.node(u), t.node(v)

    def dfs(x, prev, acc):
        if x == dst:
            return acc
        for y in adj[x]:
            if y != prev:
                r = dfs(y, x, acc + [frozenset((x, y))])
                if r is not None:
                    return r
        return None

    return dfs(src, None, [])


def brute_path_nodes(t: Tree, u: str, v: str) -> List[int]:
    nodes = [t.node(u)]
    for e in brute_path(t, u, v):
        (x,) = e - {nodes[-1]}
        nodes.append(x)
    return nodes


def oracle_edge_splits(t: Tree) -> Dict[FrozenSet[int], Tuple[FrozenSet[str], FrozenSet[str]]]:
    """For every edge: delete it, flood from each end, collect leaf labels."""
    adj = _adj(t)
    out = {}
    for v in adj:
        for w in adj[v]:
            if v < w:
                sides = []
                for start, banned in ((v, w), (w, v)):
                    seen = {start}
                    stack = [start]
                    while stack:
                        x = stack.pop()
                        for y in adj[x]:
                            if y not in seen and not (x == start and y == banned):
                                seen.add(y)
                                stack.append(y)
                    sides.append(frozenset(t.label(x) for x in seen if t.is_leaf(x)))
                out[frozenset((v, w))] = (sides[0], sides[1])
    return out


def _norm(a: FrozenSet[str], b: FrozenSet[str]) -> Tuple[FrozenSet[str], FrozenSet[str]]:
    return (a, b) if min(a) < min(b) else (b, a)


def oracle_splits(t: Tree) -> FrozenSet[Tuple[FrozenSet[str], FrozenSet[str]]]:
    return frozenset(_norm(a, b) for a, b in oracle_edge_splits(t).values())


def oracle_restrict_splits(t: Tree, l: Iterable[str], edge_splits=None) -> FrozenSet[Tuple[FrozenSet[str], FrozenSet[str]]]:
    """Traces ``A&l | B&l`` of the splits of ``t`` with both sides nonempty.

    ``edge_splits`` may pass a precomputed :func:`oracle_edge_splits`.
    """
    l = frozenset(l)
    out = set()
    for a, b in (edge_splits or oracle_edge_splits(t)).values():
        x, y = a & l, b & l
        if x and y:
            out.add(_norm(x, y))
    return frozenset(out)


def oracle_restrict_lengths(t: Tree, w: Dict, l: Iterable[str], edge_splits=None) -> Dict[Tuple[FrozenSet[str], FrozenSet[str]], float]:
    """Length of each split of ``t|l``: the sum over ambient edges with that trace."""
    l = frozenset(l)
    out: Dict = {}
    for e, (a, b) in (edge_splits or oracle_edge_splits(t)).items():
        x, y = a & l, b & l
        if x and y:
            key = _norm(x, y)
            out[key] = out.get(key, 0.0) + w[tuple(sorted(e))]
    return out


def as_pairs(splits) -> FrozenSet[Tuple[FrozenSet[str], FrozenSet[str]]]:
    """Convert :class:`Split` objects to the oracle's tuple form."""
    return frozenset(_norm(s.side_a, s.side_b) for s in splits)


def brute_path_sum(t: Tree, w: Dict, u: str, v: str) -> float:
    return sum(w[tuple(sorted(e))] for e in brute_path(t, u, v))


def brute_ell_bar(t: Tree, tail: int, head: int, targets: Optional[Iterable[str]] = None) -> int:
    """Shortest simple path starting with edge ``tail -> head`` and ending at a
    target leaf, counted in edges; found by enumerating all simple paths."""
    adj = _adj(t)
    goal = {t.node(x) for x in (t.labels if targets is None else targets)}
    best = math.inf

    def walk(x, visited, length):
        nonlocal best
        if x in goal:
            best = min(best, length)
        for y in adj[x]:
            if y not in visited:
                walk(y, visited | {y}, length + 1)

    walk(head, {tail, head}, 1)
    return best


def brute_edge_disjoint(t: Tree, l1: Iterable[str], l2: Iterable[str]) -> bool:
    """No path between two leaves of ``l1`` shares an edge with a path between
    two leaves of ``l2``."""
    l1, l2 = sorted(l1), sorted(l2)
    for u1, v1 in itertools.combinations(l1, 2):
        p1 = set(brute_path(t, u1, v1))
        for u2, v2 in itertools.combinations(l2, 2):
            if p1 & set(brute_path(t, u2, v2)):
                return False
    return True


def brute_vertex_disjoint(t: Tree, l1: Iterable[str], l2: Iterable[str]) -> bool:
    l1, l2 = sorted(l1), sorted(l2)
    for u1, v1 in itertools.combinations(l1, 2):
        p1 = set(brute_path_nodes(t, u1, v1))
        for u2, v2 in itertools.combinations(l2, 2):
            if p1 & set(brute_path_nodes(t, u2, v2)):
                return False
    return True


class PathTable:
    """All leaf-pair paths of one tree as edge and vertex bitmasks.

    ``edge_union(S)`` is the union of the paths between leaves of ``S``; two
    sets are edge disjoint exactly when their unions do not meet.
    """

    def __init__(self, t: Tree):
        self.tree = t
        nodes = sorted(t.nodes)
        self._vbit = {v: 1 << i for i, v in enumerate(nodes)}
        edges = sorted({tuple(sorted(e)) for v in nodes for e in [(v, w) for w in t.neighbors(v)]})
        self._ebit = {frozenset(e): 1 << i for i, e in enumerate(edges)}
        labels = sorted(t.labels)
        self.edge_mask: Dict[FrozenSet[str], int] = {}
        self.vertex_mask: Dict[FrozenSet[str], int] = {}
        for u, v in itertools.combinations(labels, 2):
            em = 0
            for e in brute_path(t, u, v):
                em |= self._ebit[e]
            vm = 0
            for x in brute_path_nodes(t, u, v):
                vm |= self._vbit[x]
            key = frozenset((u, v))
            self.edge_mask[key] = em
            self.vertex_mask[key] = vm

    def edge_union(self, s: Iterable[str]) -> int:
        m = 0
        for u, v in itertools.combinations(sorted(s), 2):
            m |= self.edge_mask[frozenset((u, v))]
        return m

    def vertex_union(self, s: Iterable[str]) -> int:
        m = 0
        for u, v in itertools.combinations(sorted(s), 2):
            m |= self.vertex_mask[frozenset((u, v))]
        return m

    def edge_disjoint(self, l1, l2) -> bool:
        return not self.edge_union(l1) & self.edge_union(l2)

    def vertex_disjoint(self, l1, l2) -> bool:
        return not self.vertex_union(l1) & self.vertex_union(l2)


# -- instances -------------------------------------------------------------------


@dataclass
class InstanceSpec:
    """Parameters of a generated test instance.

    ``kind`` is ``"random-tree"`` or ``"lower-bound"``.  For random trees,
    ``noise`` draws i.i.d. errors uniformly from the open interval
    ``(-eps, eps)`` and ``inf_mode`` decides what happens above the cap:
    ``"truncate"`` hides every entry with ``d > M``, ``"mixed"`` hides each
    such entry with probability 1/2 and keeps a noisy value otherwise.
    """

    kind: str = "random-tree"
    n: int = 16
    levels: int = 3
    f: float = 0.5
    g: float = 2.0
    cap_m: float = 8.0
    eps: float = 0.24
    seed: int = 0
    noise: bool = True
    inf_mode: str = "truncate"


@dataclass
class Instance:
    tree: Tree
    lengths: Dict[Tuple[int, int], float]
    d: LeafMetric
    dh: LeafMetric
    params: DistortionParams


def _brute_metric(t: Tree, w: Dict) -> LeafMetric:
    labels = sorted(t.labels)
    n = len(labels)
    vals = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            vals[i, j] = vals[j, i] = brute_path_sum(t, w, labels[i], labels[j])
    return LeafMetric(labels, vals)


def _tree_metric(t: Tree, w: Dict) -> LeafMetric:
    """Leaf metric by one flood per leaf (the brute version is quadratic in paths)."""
    labels = sorted(t.labels)
    n = len(labels)
    adj = _adj(t)
    vals = np.zeros((n, n))
    for i, lab in enumerate(labels):
        src = t.node(lab)
        dist = {src: 0.0}
        stack = [src]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y not in dist:
                    dist[y] = dist[x] + w[tuple(sorted((x, y)))]
                    stack.append(y)
        for j, other in enumerate(labels):
            vals[i, j] = dist[t.node(other)]
    vals = np.minimum(vals, vals.T)
    return LeafMetric(labels, vals)


def distort(d: LeafMetric, eps: float, cap: float, rng: random.Random, noise: bool = True,
            inf_mode: str = "truncate") -> LeafMetric:
    """A random (eps, cap) distortion of ``d``."""
    n = d.n
    src = d.values
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            x = src[i, j]
            if x > cap and (inf_mode == "truncate" or rng.random() < 0.5):
                val = math.inf
            else:
                delta = rng.uniform(-eps, eps) * 0.999 if noise else 0.0
                val = max(0.0, x + delta)
            out[i, j] = out[j, i] = val
    return LeafMetric(d.labels, out)


def build_instance(spec: InstanceSpec) -> Instance:
    rng = random.Random(spec.seed)
    p = DistortionParams(spec.eps, spec.cap_m, spec.f, spec.g)
    if spec.kind == "random-tree":
        t = random_tree(spec.n, rng)
        w = random_lengths(t, spec.f, spec.g, rng)
        d = _tree_metric(t, w)
        dh = distort(d, spec.eps, spec.cap_m, rng, spec.noise, spec.inf_mode)
        return Instance(t, w, d, dh, p)
    if spec.kind == "lower-bound":
        t, w, dh = lower_bound_instance(spec.levels, spec.g, max(1, round(spec.cap_m / (2 * spec.g))))
        return Instance(t, w, _tree_metric(t, w), dh, p)
    raise ValueError(f"unknown instance kind {spec.kind!r}")


def lower_bound_instance(s: int, g: float, cap_levels: int) -> Tuple[Tree, Dict, LeafMetric]:
    """The ``s``-level tree with a degree-3 root, binary below, every edge of
    length ``g``; the metric is truncated at ``M = 2 g cap_levels``."""
    if s < 1 or cap_levels < 1:
        raise ValueError("need s >= 1 and cap_levels >= 1")
    n = 3 * 2 ** (s - 1)
    width = len(str(n - 1))
    labels = [f"x{i:0{width}d}" for i in range(n)]
    adj: Dict[int, List[int]] = {0: []}
    frontier = [0]
    next_id = 1
    for depth in range(s):
        nxt = []
        for v in frontier:
            for _ in range(3 if v == 0 else 2):
                c = next_id
                next_id += 1
                adj[v].append(c)
                adj[c] = [v]
                nxt.append(c)
        frontier = nxt
    t = Tree(adj, {v: labels[i] for i, v in enumerate(frontier)})
    w = {e: g for e in t.edges}
    d = _tree_metric(t, w)
    cap = 2 * g * cap_levels
    vals = np.array(d.values)
    vals[vals > cap] = math.inf
    return t, w, LeafMetric(d.labels, vals)


def sim_classes(d: LeafMetric, cap: float) -> List[FrozenSet[str]]:
    """Classes of ``u ~ v iff d(u, v) <= cap`` (closed transitively)."""
    labels = list(d.labels)
    n = len(labels)
    comp = list(range(n))
    vals = d.values
    for i in range(n):
        for j in range(n):
            if vals[i, j] <= cap and comp[i] != comp[j]:
                old, new = comp[j], comp[i]
                comp = [new if c == old else c for c in comp]
    groups: Dict[int, set] = {}
    for i, c in enumerate(comp):
        groups.setdefault(c, set()).add(labels[i])
    return sorted((frozenset(x) for x in groups.values()), key=min)


def sim_is_equivalence(d: LeafMetric, cap: float) -> bool:
    vals = d.values <= cap
    n = vals.shape[0]
    if not vals.diagonal().all() or not (vals == vals.T).all():
        return False
    for i in range(n):
        for j in range(n):
            if vals[i, j] and not (vals[j] | ~vals[i]).all():
                return False
    return True


# -- forest verification -----------------------------------------------------------


@dataclass
class VerifyReport:
    failures: List[Tuple[str, str]] = field(default_factory=list)
    stats: Dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures

    def fail(self, check: str, msg: str) -> None:
        self.failures.append((check, msg))

    def as_dict(self) -> dict:
        return {"ok": self.ok, "failures": [list(x) for x in self.failures], "stats": dict(self.stats)}


def _alpha_bound(n: int, p: DistortionParams) -> int:
    return math.floor(1 + 60 * n / math.sqrt(2) * 2.0 ** (-(p.cap_m - p.eps) / (2 * p.g)))


def verify_forest(t: Tree, w: Dict, res, p: DistortionParams, brute_limit: int = 40) -> VerifyReport:
    """Check a pipeline result against the true weighted tree.

    ``res`` needs ``partition``, ``forest`` (weighted trees) and ``alpha``.
    Never raises on a mismatch; every failed check is listed in the report.
    """
    rep = VerifyReport()
    labels = t.labels
    blocks = [frozenset(b) for b in res.partition]
    trees = list(res.forest)
    alpha = res.alpha
    rep.stats["alpha"] = alpha

    # coverage
    union = frozenset().union(*blocks) if blocks else frozenset()
    if union != labels or sum(len(b) for b in blocks) != len(labels):
        rep.fail("coverage", "partition does not cover the leaves exactly once")
    if alpha != len(blocks) or len(trees) != len(blocks):
        rep.fail("coverage", "alpha, partition and forest sizes disagree")
    for b, wt in zip(blocks, trees):
        if wt.tree.labels != b:
            rep.fail("coverage", f"tree leaf set differs from its block {sorted(b)[:3]}")
    if not rep.ok:
        return rep

    # restriction equality and lengths
    from .tree_core import splits as fast_splits  # only to read the candidate trees

    edge_splits = oracle_edge_splits(t)
    for b, wt in zip(blocks, trees):
        if len(b) == 1:
            continue
        want = oracle_restrict_splits(t, b, edge_splits)
        got = as_pairs(fast_splits(wt.tree))
        if got != want:
            rep.fail("restriction", f"tree on block starting {min(b)} is not the true restriction")
            continue
        true_len = oracle_restrict_lengths(t, w, b, edge_splits)
        for sp, x in wt.lengths_by_split().items():
            key = _norm(sp.side_a, sp.side_b)
            if not abs(x - true_len[key]) < 2 * p.eps:
                rep.fail("lengths", f"split {sorted(key[0])}|... off by {abs(x - true_len[key]):.4g}")

    # pairwise disjointness
    multi = [b for b in blocks if len(b) >= 2]
    if len(labels) <= brute_limit:
        table = PathTable(t)
        unions = [table.edge_union(b) for b in multi]
        for i, j in itertools.combinations(range(len(multi)), 2):
            if unions[i] & unions[j]:
                rep.fail("disjointness", f"blocks at {min(multi[i])} and {min(multi[j])} share an edge")
    else:
        sides = [a for a, _ in edge_splits.values()]
        for i, j in itertools.combinations(range(len(multi)), 2):
            b1, b2 = multi[i], multi[j]
            if not any((b1 <= s and not (b2 & s)) or (b2 <= s and not (b1 & s)) for s in sides):
                rep.fail("disjointness", f"no edge separates blocks at {min(b1)} and {min(b2)}")
    if not rep.ok:
        return rep

    # reassembly with exactly alpha - 1 edge additions
    ops = _reassemble(t, blocks, trees, rep)
    rep.stats["edge_adds"] = ops

    bound = _alpha_bound(len(labels), p)
    rep.stats["bound"] = bound
    if alpha > bound:
        rep.fail("bound", f"alpha={alpha} exceeds {bound}")
    return rep


def _span(t: Tree, block: FrozenSet[str]) -> set:
    nodes = set()
    ls = sorted(block)
    if len(ls) == 1:
        return {t.node(ls[0])}
    for u, v in itertools.combinations(ls, 2):
        nodes.update(brute_path_nodes(t, u, v))
    return nodes


def _reassemble(t: Tree, blocks, trees, rep: VerifyReport) -> int:
    adj = _adj(t)
    nodes = sorted(adj)
    pos = {v: i for i, v in enumerate(nodes)}
    V = len(nodes)
    dist = np.zeros((V, V), dtype=np.int32)
    for s in nodes:
        row = {s: 0}
        stack = [s]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y not in row:
                    row[y] = row[x] + 1
                    stack.append(y)
        for v, dv in row.items():
            dist[pos[s], pos[v]] = dv
    spans = [_span(t, b) for b in blocks]
    members = [frozenset(b) for b in blocks]
    idx = [np.array(sorted(pos[v] for v in sp)) for sp in spans]
    k = len(blocks)
    big = np.iinfo(np.int32).max
    bd = np.full((k, k), big, dtype=np.int64)
    for i in range(k):
        for j in range(i + 1, k):
            bd[i, j] = bd[j, i] = dist[np.ix_(idx[i], idx[j])].min()
    alive = list(range(k))
    forest = Forest(tuple(wt.tree for wt in trees))
    ops = 0
    while len(alive) > 1:
        sub = bd[np.ix_(alive, alive)]
        flat = int(np.argmin(sub))
        i, j = alive[flat // len(alive)], alive[flat % len(alive)]
        block_d = dist[np.ix_(idx[i], idx[j])]
        a, b = np.unravel_index(int(np.argmin(block_d)), block_d.shape)
        x, y = nodes[idx[i][a]], nodes[idx[j][b]]
        try:
            op = _edge_add_op(t, adj, spans[i], members[i], x, spans[j], members[j], y)
            forest = apply_edge_add(forest, op)
        except (DistForestError, ValueError) as exc:
            rep.fail("reassembly", f"edge add between blocks at {min(members[i])} and {min(members[j])}: {exc}")
            return ops
        ops += 1
        path = _node_path(adj, x, y)
        spans[i] = spans[i] | spans[j] | set(path)
        members[i] = members[i] | members[j]
        idx[i] = np.array(sorted(pos[v] for v in spans[i]))
        alive.remove(j)
        for o in alive:
            if o != i:
                bd[i, o] = bd[o, i] = dist[np.ix_(idx[i], idx[o])].min()
    if ops != len(blocks) - 1:
        rep.fail("reassembly", f"used {ops} edge adds for {len(blocks)} trees")
    final = forest.trees[0]
    from .tree_core import splits as fast_splits

    if as_pairs(fast_splits(final)) != oracle_splits(t):
        rep.fail("reassembly", "reassembled tree differs from the truth")
    return ops


def _node_path(adj, x, y) -> List[int]:
    prev = {x: None}
    stack = [x]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in prev:
                prev[w] = v
                stack.append(w)
    out = [y]
    while out[-1] != x:
        out.append(prev[out[-1]])
    return out


def _attach_point(t: Tree, adj, span: set, block: FrozenSet[str], x: int):
    """Isolated leaf label, or the label set on one side of the forest edge
    that passes through span vertex ``x``."""
    if len(block) == 1:
        return ("leaf", next(iter(block)))
    inner = [y for y in adj[x] if y in span]
    if len(inner) != 2:
        raise InvalidTarget("closest span vertex is not interior to an edge")
    start = inner[0]
    seen = {x, start}
    stack = [start]
    found = set()
    while stack:
        v = stack.pop()
        if t.is_leaf(v) and t.label(v) in block:
            found.add(t.label(v))
        for w in adj[v]:
            if w in span and w not in seen:
                seen.add(w)
                stack.append(w)
    return ("edge", frozenset(found))


def _edge_add_op(t, adj, span1, block1, x, span2, block2, y):
    p1 = _attach_point(t, adj, span1, block1, x)
    p2 = _attach_point(t, adj, span2, block2, y)
    if p1[0] == "leaf" and p2[0] == "leaf":
        return JoinLeaves(p1[1], p2[1])
    if p1[0] == "leaf":
        return AttachLeaf(p2[1], p1[1])
    if p2[0] == "leaf":
        return AttachLeaf(p1[1], p2[1])
    return BridgeEdges(p1[1], p2[1])
