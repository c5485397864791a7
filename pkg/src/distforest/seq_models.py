"""
Markov mutation models on trees, character simulation, joint frequencies and
the log-det distance estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ModelMismatch, OutOfRange, UnknownLabel
from .metric_space import DistortionParams, LeafMetric, WeightedTree
from .tree_core import Tree, canonical_edge

# determinants below this magnitude count as non-positive
DET_FLOOR = 1e-300


@dataclass(frozen=True)
class Threshold:
    """The two numbers the log-det estimator needs: accuracy and cap.

    :class:`DistortionParams` works wherever a Threshold does.
    """

    eps: float
    cap_m: float

    def __post_init__(self):
        if not (self.eps > 0 and self.cap_m > 0):
            raise OutOfRange("eps and cap must be positive")


@dataclass(frozen=True)
class Alphabet:
    symbols: Tuple[str, ...]

    def __post_init__(self):
        syms = tuple(str(s) for s in self.symbols)
        if len(syms) < 2 or len(set(syms)) != len(syms):
            raise ModelMismatch("an alphabet needs at least two distinct symbols")
        if any(len(s) != 1 for s in syms):
            raise ModelMismatch("symbols must be single characters")
        object.__setattr__(self, "symbols", syms)

    def __len__(self) -> int:
        return len(self.symbols)

    def index(self, s: str) -> int:
        try:
            return self.symbols.index(s)
        except ValueError:
            raise ModelMismatch(f"symbol {s!r} is not in the alphabet") from None


BINARY = Alphabet(("0", "1"))
DNA = Alphabet(("A", "C", "G", "T"))


def cfn_matrix(theta: float) -> np.ndarray:
    """Two-state symmetric flip matrix."""
    if not 0 <= theta < 0.5:
        raise OutOfRange(f"CFN theta must be in [0, 1/2), got {theta}")
    return np.array([[1 - theta, theta], [theta, 1 - theta]])


def jc_matrix(theta: float) -> np.ndarray:
    """Four-state Jukes-Cantor matrix with off-diagonal ``theta``."""
    if not 0 <= theta < 0.25:
        raise OutOfRange(f"JC theta must be in [0, 1/4), got {theta}")
    m = np.full((4, 4), theta)
    np.fill_diagonal(m, 1 - 3 * theta)
    return m


def cfn_theta(length: float) -> float:
    """Flip probability whose matrix has ``-log det = length``."""
    return (1 - math.exp(-length)) / 2


def jc_theta(length: float) -> float:
    return (1 - math.exp(-length / 3)) / 4


def determinant(a) -> float:
    """Determinant by Gaussian elimination with row pivoting."""
    m = [list(map(float, row)) for row in a]
    n = len(m)
    if any(len(row) != n for row in m):
        raise ValueError("determinant of a non-square matrix")
    det = 1.0
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(m[r][col]))
        if m[piv][col] == 0.0:
            return 0.0
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            det = -det
        p = m[col][col]
        det *= p
        for r in range(col + 1, n):
            fct = m[r][col] / p
            if fct:
                row_r, row_c = m[r], m[col]
                for c2 in range(col + 1, n):
                    row_r[c2] -= fct * row_c[c2]
    return det


class MutationModel:
    """A Markov chain on a tree rooted at ``root``.

    Parameters
    ----------
    tree : Tree
    root : int
        Node at which the root distribution applies.
    root_distribution : array_like
        Strictly positive probability vector.
    edge_matrices : mapping
        Edge (any node pair orientation, or frozenset of the two nodes) to a
        row-stochastic matrix applied from the root-side endpoint outward.
    alphabet : Alphabet
    """

    def __init__(self, tree: Tree, root: int, root_distribution, edge_matrices: Mapping, alphabet: Alphabet):
        k = len(alphabet)
        pi = np.asarray(root_distribution, dtype=float)
        if pi.shape != (k,):
            raise ModelMismatch("root distribution does not match the alphabet")
        if (pi <= 0).any() or abs(pi.sum() - 1) > 1e-12:
            raise ModelMismatch("root distribution must be positive and sum to 1")
        if root not in tree.nodes:
            raise ModelMismatch(f"root {root} is not a node of the tree")
        mats: Dict[Tuple[int, int], np.ndarray] = {}
        for key, mat in edge_matrices.items():
            a, b = tuple(key)
            e = canonical_edge(a, b)
            mat = np.asarray(mat, dtype=float)
            if mat.shape != (k, k):
                raise ModelMismatch(f"matrix for edge {e} has shape {mat.shape}")
            if (mat < 0).any() or np.abs(mat.sum(axis=1) - 1).max() > 1e-12:
                raise ModelMismatch(f"matrix for edge {e} is not row-stochastic")
            mats[e] = mat
        if set(mats) != set(tree.edges):
            raise ModelMismatch("edge matrices must cover exactly the edges of the tree")
        self.tree = tree
        self.root = root
        self.pi = pi
        self.alphabet = alphabet
        self._mats = mats
        parent = {root: None}
        order = [root]
        for v in order:
            for w in tree.neighbors(v):
                if w not in parent:
                    parent[w] = v
                    order.append(w)
        self.parent = parent
        self.order = order

    def matrix(self, parent: int, child: int) -> np.ndarray:
        return self._mats[canonical_edge(parent, child)]

    def node_distribution(self, v: int) -> np.ndarray:
        dist = self.pi
        for a, b in self._path_from_root(v):
            dist = dist @ self.matrix(a, b)
        return dist

    def _path_from_root(self, v: int) -> List[Tuple[int, int]]:
        path = []
        while self.parent[v] is not None:
            path.append((self.parent[v], v))
            v = self.parent[v]
        return path[::-1]

    def edge_lengths(self) -> Dict[Tuple[int, int], float]:
        """``-log det M(e)`` per edge."""
        return {e: -math.log(determinant(m)) for e, m in self._mats.items()}

    def is_stationary(self, tol: float = 1e-12) -> bool:
        return all(np.abs(self.pi @ m - self.pi).max() <= tol for m in self._mats.values())


def _default_root(t: Tree) -> int:
    internal = [v for v in t.nodes if not t.is_leaf(v)]
    return min(internal) if internal else min(t.nodes)


def cfn_model(wt: WeightedTree, root: Optional[int] = None) -> MutationModel:
    """CFN model with uniform root whose edge ``-log det`` equal ``wt`` lengths."""
    mats = {e: cfn_matrix(cfn_theta(x)) for e, x in wt.lengths.items()}
    r = _default_root(wt.tree) if root is None else root
    return MutationModel(wt.tree, r, [0.5, 0.5], mats, BINARY)


def jc_model(wt: WeightedTree, root: Optional[int] = None) -> MutationModel:
    mats = {e: jc_matrix(jc_theta(x)) for e, x in wt.lengths.items()}
    r = _default_root(wt.tree) if root is None else root
    return MutationModel(wt.tree, r, [0.25] * 4, mats, DNA)


class CharacterMatrix:
    """Aligned characters: ``data[i, s]`` is the symbol index of leaf
    ``labels[i]`` at site ``s``."""

    def __init__(self, labels: Sequence[str], data, alphabet: Alphabet):
        labels = tuple(str(x) for x in labels)
        arr = np.asarray(data)
        if arr.ndim != 2 or arr.shape[0] != len(labels):
            raise ModelMismatch("data must have one row per label")
        if len(set(labels)) != len(labels):
            raise ModelMismatch("labels must be unique")
        if arr.size and (arr.min() < 0 or arr.max() >= len(alphabet)):
            raise ModelMismatch("symbol index outside the alphabet")
        arr = arr.astype(np.int8 if len(alphabet) < 128 else np.int32)
        arr.setflags(write=False)
        self.labels = labels
        self.data = arr
        self.alphabet = alphabet
        self._index = {lab: i for i, lab in enumerate(labels)}

    @property
    def k(self) -> int:
        return self.data.shape[1]

    def row(self, label: str) -> np.ndarray:
        try:
            return self.data[self._index[label]]
        except KeyError:
            raise UnknownLabel(f"unknown label {label!r}") from None

    def sequence(self, label: str) -> str:
        syms = self.alphabet.symbols
        return "".join(syms[i] for i in self.row(label))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CharacterMatrix)
            and self.labels == other.labels
            and self.alphabet == other.alphabet
            and np.array_equal(self.data, other.data)
        )


def simulate(t: Tree, m: MutationModel, k: int, seed: int) -> CharacterMatrix:
    """Draw ``k`` independent characters; deterministic given ``seed``."""
    if set(m.tree.edges) != set(t.edges) or m.tree.labels != t.labels:
        raise ModelMismatch("model is defined on a different tree")
    if k < 0:
        raise ModelMismatch("number of sites must be nonnegative")
    rng = np.random.default_rng(seed)
    states: Dict[int, np.ndarray] = {}
    cum_pi = np.cumsum(m.pi)
    states[m.root] = np.minimum((rng.random(k)[:, None] >= cum_pi[None, :-1]).sum(axis=1), len(m.pi) - 1)
    for v in m.order[1:]:
        p = m.parent[v]
        cum = np.cumsum(m.matrix(p, v), axis=1)
        u = rng.random(k)
        ps = states[p]
        states[v] = (u[:, None] >= cum[ps][:, :-1]).sum(axis=1)
    labels = sorted(t.labels)
    data = np.array([states[t.node(lab)] for lab in labels]) if labels else np.zeros((0, k))
    return CharacterMatrix(labels, data.reshape(len(labels), k), m.alphabet)


@dataclass(frozen=True)
class JointFrequency:
    table: np.ndarray

    def __post_init__(self):
        tab = np.array(self.table, dtype=float)
        if tab.ndim != 2 or tab.shape[0] != tab.shape[1]:
            raise ModelMismatch("joint table must be square")
        if (tab < 0).any() or abs(tab.sum() - 1) > 1e-12:
            raise ModelMismatch("joint table must be a probability table")
        tab.setflags(write=False)
        object.__setattr__(self, "table", tab)

    @property
    def det(self) -> float:
        return determinant(self.table)


def _meeting_node(m: MutationModel, a: int, b: int) -> int:
    anc = set()
    x = a
    while x is not None:
        anc.add(x)
        x = m.parent[x]
    x = b
    while x not in anc:
        x = m.parent[x]
    return x


def _down(m: MutationModel, top: int, v: int) -> np.ndarray:
    mat = np.eye(len(m.pi))
    path = []
    while v != top:
        path.append((m.parent[v], v))
        v = m.parent[v]
    for a, b in reversed(path):
        mat = mat @ m.matrix(a, b)
    return mat


def exact_joint(t: Tree, m: MutationModel, u: str, v: str) -> JointFrequency:
    """Exact ``P(X_u = a, X_v = b)``."""
    a, b = t.node(u), t.node(v)
    w = _meeting_node(m, a, b)
    pw = m.node_distribution(w)
    f = _down(m, w, a).T @ np.diag(pw) @ _down(m, w, b)
    f = f / f.sum()  # remove rounding drift
    return JointFrequency(f)


def empirical_joint(c: CharacterMatrix, u: str, v: str) -> JointFrequency:
    """Site counts of ``(a at u, b at v)`` divided by ``k``."""
    if c.k < 1:
        raise ModelMismatch("no sites")
    A = len(c.alphabet)
    x = c.row(u).astype(np.int64)
    y = c.row(v).astype(np.int64)
    counts = np.bincount(x * A + y, minlength=A * A).reshape(A, A)
    return JointFrequency(counts / c.k)


def logdet_distance(f: JointFrequency, p: DistortionParams) -> float:
    """``-log det F`` when ``det F > 0`` and the value is at most ``M + eps``;
    ``inf`` otherwise."""
    det = f.det
    if det <= 0 or abs(det) < DET_FLOOR:
        return math.inf
    val = -math.log(det)
    return val if val <= p.cap_m + p.eps else math.inf


def distance_matrix(c: CharacterMatrix, p: DistortionParams) -> LeafMetric:
    """Log-det estimates for all leaf pairs."""
    n = len(c.labels)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = logdet_distance(empirical_joint(c, c.labels[i], c.labels[j]), p)
    return LeafMetric(c.labels, out)


def logdet_metric(t: Tree, m: MutationModel) -> LeafMetric:
    """Exact ``-log det F`` for all leaf pairs (the model's true metric)."""
    labels = sorted(t.labels)
    n = len(labels)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = -math.log(exact_joint(t, m, labels[i], labels[j]).det)
    return LeafMetric(labels, out)


def logdet_tree(m: MutationModel) -> WeightedTree:
    """Edge lengths realizing :func:`logdet_metric` as a path metric.

    With a stationary root distribution the node term ``-log det diag(pi)``
    is the same for every pair; half of it is added to each pendant edge.
    """
    if not m.is_stationary(1e-9):
        raise ModelMismatch("node term varies along the tree; root distribution is not stationary")
    node_term = -sum(math.log(x) for x in m.pi)
    t = m.tree
    lengths = {}
    for e, x in m.edge_lengths().items():
        pend = sum(1 for v in e if t.is_leaf(v))
        lengths[e] = x + node_term / 2 * pend
    return WeightedTree(t, lengths)
