"""
Leaf metrics, edge lengths, distortions, truncation and balls.

``math.inf`` (equivalently ``np.inf``) is the sentinel for an unknown
distance.  It is a value to compare against, never to do arithmetic with.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from .errors import InvalidMetric, LabelMismatch, MissingLength, UnknownLabel
from .tree_core import Edge, Split, Tree, _restrict, canonical_edge

INF = math.inf


class LeafMetric:
    """A symmetric table of distances between labeled leaves.

    Parameters
    ----------
    labels : sequence of str
        Row/column order.  Labels must be unique.
    values : array_like, shape (n, n)
        Nonnegative reals or ``inf``.  The diagonal must be zero.
    check_symmetry : bool
        Estimated metrics are symmetric by construction, but a caller may
        want to inspect an asymmetric table with :func:`is_distortion`;
        pass ``False`` to skip the symmetry check.
    """

    __slots__ = ("_labels", "_index", "_values", "_rows")

    def __init__(self, labels: Sequence[str], values, check_symmetry: bool = True):
        labels = [str(x) for x in labels]
        arr = np.array(values, dtype=float)
        n = len(labels)
        if len(set(labels)) != n:
            raise InvalidMetric("labels must be unique")
        if arr.shape != (n, n):
            raise InvalidMetric(f"expected a {n}x{n} table, got shape {arr.shape}")
        if np.isnan(arr).any():
            raise InvalidMetric("NaN entries are not allowed")
        if (arr < 0).any():
            raise InvalidMetric("distances must be nonnegative")
        if n and (np.diag(arr) != 0).any():
            raise InvalidMetric("diagonal must be zero")
        if check_symmetry and not np.array_equal(arr, arr.T):
            raise InvalidMetric("table is not symmetric")
        arr.setflags(write=False)
        self._labels = tuple(labels)
        self._index = {lab: i for i, lab in enumerate(labels)}
        self._values = arr
        self._rows = None

    @property
    def labels(self):
        return self._labels

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def n(self) -> int:
        return len(self._labels)

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise UnknownLabel(f"unknown label {label!r}") from None

    def rows(self) -> List[List[float]]:
        """Plain nested lists, faster than numpy for scalar lookups."""
        if self._rows is None:
            self._rows = self._values.tolist()
        return self._rows

    def __call__(self, u: str, v: str) -> float:
        return self.rows()[self.index(u)][self.index(v)]

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self._values, self._values.T))

    def submetric(self, labels: Iterable[str]) -> "LeafMetric":
        labs = sorted(labels)
        idx = [self.index(x) for x in labs]
        return LeafMetric(labs, self._values[np.ix_(idx, idx)], check_symmetry=False)

    def reordered(self, labels: Sequence[str]) -> "LeafMetric":
        if set(labels) != set(self._labels) or len(labels) != self.n:
            raise LabelMismatch("reordering must use the same labels")
        return self.submetric_ordered(labels)

    def submetric_ordered(self, labels: Sequence[str]) -> "LeafMetric":
        idx = [self.index(x) for x in labels]
        return LeafMetric(list(labels), self._values[np.ix_(idx, idx)], check_symmetry=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LeafMetric):
            return NotImplemented
        if set(self._labels) != set(other._labels):
            return False
        o = other.submetric_ordered(self._labels)
        return bool(np.array_equal(self._values, o._values))

    def __repr__(self) -> str:
        return f"LeafMetric(n={self.n})"


@dataclass(frozen=True)
class DistortionParams:
    """Accuracy ``eps``, cap ``cap_m`` and edge-length bounds ``f <= g``."""

    eps: float
    cap_m: float
    f: float
    g: float

    def __post_init__(self):
        if not (0 < self.f <= self.g):
            raise InvalidMetric(f"need 0 < f <= g, got f={self.f}, g={self.g}")
        if not (0 < self.eps < self.f / 2):
            raise InvalidMetric(f"need 0 < eps < f/2, got eps={self.eps}, f={self.f}")
        if not (self.cap_m > 7 * self.eps):
            raise InvalidMetric(f"need M > 7 eps, got M={self.cap_m}, eps={self.eps}")


class WeightedTree:
    """A tree with a positive length on every edge.

    ``lengths`` maps canonical node pairs ``(a, b)``, ``a < b``, to reals.
    """

    __slots__ = ("tree", "_lengths")

    def __init__(self, tree: Tree, lengths: Mapping[Edge, float]):
        clean: Dict[Edge, float] = {}
        for e, x in lengths.items():
            clean[canonical_edge(*e)] = float(x)
        missing = set(tree.edges) - set(clean)
        if missing:
            raise MissingLength(f"{len(missing)} edges have no length, e.g. {sorted(missing)[0]}")
        extra = set(clean) - set(tree.edges)
        if extra:
            raise MissingLength(f"lengths given for non-edges, e.g. {sorted(extra)[0]}")
        for e, x in clean.items():
            if not (x > 0) or math.isinf(x):
                raise InvalidMetric(f"edge {e} has non-positive or infinite length {x}")
        self.tree = tree
        self._lengths = clean

    @property
    def lengths(self) -> Dict[Edge, float]:
        return dict(self._lengths)

    def length(self, a: int, b: int) -> float:
        return self._lengths[canonical_edge(a, b)]

    @property
    def labels(self) -> FrozenSet[str]:
        return self.tree.labels

    def lengths_by_split(self) -> Dict[Split, float]:
        full = self.tree.labels
        return {
            Split(side, full - side): self._lengths[e] for e, side in self.tree.edge_sides().items()
        }

    def within(self, f: float, g: float) -> bool:
        return all(f <= x <= g for x in self._lengths.values())

    def __repr__(self) -> str:
        return f"WeightedTree(n={self.tree.n})"


def weighted_from_splits(lengths: Mapping[Split, float], labels: Iterable[str]) -> WeightedTree:
    """Rebuild a weighted tree from split lengths (all splits, trivial included)."""
    from .tree_core import tree_from_splits

    t = tree_from_splits(lengths.keys(), labels)
    by_split = {}
    full = t.labels
    for e, side in t.edge_sides().items():
        sp = Split(side, full - side)
        if sp not in lengths:
            raise MissingLength(f"no length for split {sp}")
        by_split[e] = lengths[sp]
    return WeightedTree(t, by_split)


def path_metric(t, w: Optional[Mapping[Edge, float]] = None) -> LeafMetric:
    """Leaf-to-leaf path lengths.

    Accepts either a :class:`WeightedTree` or a tree plus an edge-length map.
    """
    if isinstance(t, WeightedTree):
        wt = t
    else:
        if w is None:
            raise MissingLength("edge lengths are required")
        wt = WeightedTree(t, w)
    tree = wt.tree
    labels = sorted(tree.labels)
    n = len(labels)
    out = np.zeros((n, n))
    adj = {v: tree.neighbors(v) for v in tree.nodes}
    lens = wt._lengths
    leaf_nodes = [tree.node(lab) for lab in labels]
    col = {v: j for j, v in enumerate(leaf_nodes)}
    for i, src in enumerate(leaf_nodes):
        dist = {src: 0.0}
        stack = [src]
        while stack:
            x = stack.pop()
            dx = dist[x]
            for y in adj[x]:
                if y not in dist:
                    dist[y] = dx + lens[(x, y) if x < y else (y, x)]
                    stack.append(y)
        for v, j in col.items():
            out[i, j] = dist[v]
    out = np.minimum(out, out.T)  # exact symmetry despite summation order
    return LeafMetric(labels, out)


def _check_same_labels(d: LeafMetric, dh: LeafMetric) -> None:
    if set(d.labels) != set(dh.labels) or d.n != dh.n:
        raise LabelMismatch("metrics are over different label sets")


def is_distortion(d: LeafMetric, dh: LeafMetric, p: DistortionParams) -> bool:
    """Whether ``dh`` is an (eps, M) distortion of ``d``."""
    _check_same_labels(d, dh)
    a = d.values
    b = dh.submetric_ordered(d.labels).values if dh.labels != d.labels else dh.values
    if not np.array_equal(b, b.T):
        return False
    inf = np.isinf(b)
    if (a[inf] <= p.cap_m).any():
        return False
    fin = ~inf
    if np.isinf(a[fin]).any():
        return False
    return bool((np.abs(b[fin] - a[fin]) < p.eps).all())


def truncate(d: LeafMetric, cap: float) -> LeafMetric:
    """Replace entries above ``cap`` by ``inf``."""
    if not cap > 0:
        raise InvalidMetric("cap must be positive")
    vals = np.array(d.values)
    vals[vals > cap] = INF
    return LeafMetric(d.labels, vals, check_symmetry=False)


def ball(dh: LeafMetric, v: str, r: float) -> FrozenSet[str]:
    """``{w : dh(v, w) <= r} | {v}``."""
    i = dh.index(v)
    row = dh.rows()[i]
    labs = dh.labels
    return frozenset([labs[j] for j, x in enumerate(row) if x <= r] + [v])


def restrict_weighted(wt: WeightedTree, labels: Iterable[str]) -> WeightedTree:
    """Restriction that sums lengths across suppressed nodes.

    Single-leaf restrictions have no edges and return a one-node tree.
    """
    keep = frozenset(labels)
    t, lens = _restrict(wt.tree, keep, wt._lengths)
    return WeightedTree(t, lens)


def four_point_gap(d: LeafMetric, u: str, v: str, w: str, x: str) -> float:
    """Difference between the two largest of the three quartet pair-sums."""
    r = d.rows()
    i, j, k, l = (d.index(y) for y in (u, v, w, x))
    s = sorted((r[i][j] + r[k][l], r[i][k] + r[j][l], r[i][l] + r[j][k]))
    return s[2] - s[1]
