"""
Text formats: Newick trees and forests, distance matrices, sequences.

Newick input may be rooted; a root of degree 2 is removed by merging its two
edges (lengths add).  Output is unrooted: a tree is written from the internal
neighbour of its smallest leaf label, children ordered by smallest label, so
equal trees serialize identically.
"""

from __future__ import annotations

import math
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import AsymmetryError, DistForestError, ParseError, RaggedLengths
from .metric_space import LeafMetric, WeightedTree
from .seq_models import BINARY, DNA, Alphabet, CharacterMatrix
from .tree_core import Tree

_SPECIAL = set("(),:;")


def fmt_num(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return format(x, ".12g")


# -- Newick ------------------------------------------------------------------------


class _Node:
    __slots__ = ("children", "name", "length", "pos")

    def __init__(self, pos):
        self.children: List["_Node"] = []
        self.name: Optional[str] = None
        self.length: Optional[float] = None
        self.pos = pos


class _NewickReader:
    def __init__(self, text: str, line: int):
        self.s = text
        self.i = 0
        self.line = line

    def err(self, msg: str, i: Optional[int] = None) -> ParseError:
        return ParseError(msg, self.line, (self.i if i is None else i) + 1)

    def skip_ws(self):
        while self.i < len(self.s) and self.s[self.i].isspace():
            self.i += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.s[self.i] if self.i < len(self.s) else ""

    def token(self) -> str:
        self.skip_ws()
        j = self.i
        while j < len(self.s) and self.s[j] not in _SPECIAL and not self.s[j].isspace():
            j += 1
        tok = self.s[self.i:j]
        self.i = j
        return tok

    def subtree(self, depth: int = 0) -> _Node:
        node = _Node(self.i)
        if self.peek() == "(":
            self.i += 1
            while True:
                node.children.append(self.subtree(depth + 1))
                c = self.peek()
                if c == ",":
                    self.i += 1
                    continue
                if c == ")":
                    self.i += 1
                    break
                raise self.err("expected ',' or ')'" if c else "unbalanced parenthesis")
            name = self.token()
            node.name = name or None
        else:
            name = self.token()
            if not name:
                raise self.err("expected a leaf label")
            node.name = name
        if self.peek() == ":":
            self.i += 1
            start = self.i
            tok = self.token()
            try:
                node.length = float(tok)
            except ValueError:
                raise self.err(f"bad branch length {tok!r}", start) from None
            if not math.isfinite(node.length):
                raise self.err(f"branch length {tok!r} is not finite", start)
        return node

    def tree(self) -> _Node:
        root = self.subtree()
        if self.peek() != ";":
            raise self.err("expected ';'" if self.peek() != ")" else "unbalanced parenthesis")
        self.i += 1
        if self.peek():
            raise self.err("trailing text after ';'")
        return root


def _to_tree(root: _Node, line: int) -> Union[Tree, WeightedTree]:
    adj: Dict[int, List[int]] = {}
    labels: Dict[int, str] = {}
    lengths: Dict[Tuple[int, int], Optional[float]] = {}
    ids = {}
    stack = [root]
    order = []
    while stack:
        nd = stack.pop()
        ids[id(nd)] = len(ids)
        order.append(nd)
        stack.extend(reversed(nd.children))
    for nd in order:
        v = ids[id(nd)]
        adj.setdefault(v, [])
        if not nd.children:
            if nd.name is None:
                raise ParseError("leaf without a label", line, nd.pos + 1)
            if nd.name in labels.values():
                raise ParseError(f"duplicate leaf label {nd.name!r}", line, nd.pos + 1)
            labels[v] = nd.name
        elif len(nd.children) == 1:
            raise ParseError("node with a single child", line, nd.pos + 1)
        for ch in nd.children:
            w = ids[id(ch)]
            adj[v].append(w)
            adj.setdefault(w, []).append(v)
            lengths[(min(v, w), max(v, w))] = ch.length
    have = [x is not None for x in lengths.values()]
    if any(have) and not all(have):
        raise ParseError("branch lengths must be given on all edges or on none", line)
    weighted = bool(have) and all(have)
    if weighted and any(x <= 0 for x in lengths.values()):
        raise ParseError("branch lengths must be positive", line)
    r = ids[id(root)]
    if len(root.children) == 2:
        a, b = adj[r]
        la = lengths.pop((min(r, a), max(r, a)))
        lb = lengths.pop((min(r, b), max(r, b)))
        adj[a].remove(r)
        adj[b].remove(r)
        adj[a].append(b)
        adj[b].append(a)
        del adj[r]
        lengths[(min(a, b), max(a, b))] = (la + lb) if weighted else None
    try:
        t = Tree(adj, labels)
    except DistForestError as exc:
        raise ParseError(f"not a binary tree: {exc}", line) from None
    if not weighted:
        return WeightedTree(t, {}) if t.n == 1 else t
    return WeightedTree(t, lengths)


def parse_newick(text: str, line: int = 1) -> Union[Tree, WeightedTree]:
    """One tree; a :class:`WeightedTree` when branch lengths are present."""
    text = text.strip()
    if not text:
        raise ParseError("empty tree", line, 1)
    root = _NewickReader(text, line).tree()
    return _to_tree(root, line)


def parse_forest(text: str) -> List[Union[Tree, WeightedTree]]:
    """One tree per nonblank line."""
    out = []
    for k, ln in enumerate(text.splitlines(), start=1):
        if ln.strip():
            out.append(parse_newick(ln, line=k))
    return out


def write_newick(t: Union[Tree, WeightedTree]) -> str:
    if isinstance(t, WeightedTree):
        tree, lens = t.tree, t.lengths
    else:
        tree, lens = t, None
    labels = sorted(tree.labels)
    if tree.n == 1:
        return labels[0] + ";"
    if tree.n == 2:
        a, b = labels
        if lens is None:
            return f"({a},{b});"
        (x,) = lens.values()
        return f"({a}:{fmt_num(x / 2)},{b}:{fmt_num(x / 2)});"
    root = tree.neighbors(tree.node(labels[0]))[0]
    parent = {root: None}
    order = [root]
    for v in order:
        for w in tree.neighbors(v):
            if w not in parent:
                parent[w] = v
                order.append(w)
    minlab: Dict[int, str] = {}
    for v in reversed(order):
        if tree.is_leaf(v):
            minlab[v] = tree.label(v)
        else:
            minlab[v] = min(minlab[w] for w in tree.neighbors(v) if w != parent[v])
    text: Dict[int, str] = {}
    for v in reversed(order):
        if tree.is_leaf(v):
            s = tree.label(v)
        else:
            kids = sorted((w for w in tree.neighbors(v) if w != parent[v]), key=minlab.__getitem__)
            s = "(" + ",".join(text.pop(w) for w in kids) + ")"
        if lens is not None and parent[v] is not None:
            p = parent[v]
            s += ":" + fmt_num(lens[(min(v, p), max(v, p))])
        text[v] = s
    return text[root] + ";"


def write_forest(trees: Sequence[Union[Tree, WeightedTree]]) -> str:
    return "".join(write_newick(t) + "\n" for t in trees)


# -- distance matrices ---------------------------------------------------------------


def parse_dist(text: str) -> LeafMetric:
    """``n`` on the first line, then ``label v_1 .. v_n`` per row."""
    lines = [(k, ln) for k, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        raise ParseError("empty distance file", 1, 1)
    k0, first = lines[0]
    try:
        n = int(first.split()[0])
    except ValueError:
        raise ParseError("first line must be the number of leaves", k0, 1) from None
    if len(first.split()) != 1 or n < 1:
        raise ParseError("first line must be a single positive integer", k0, 1)
    rows = lines[1:]
    if len(rows) != n:
        raise ParseError(f"expected {n} rows, found {len(rows)}", rows[-1][0] if rows else k0)
    labels = []
    vals = np.zeros((n, n))
    for i, (k, ln) in enumerate(rows):
        toks = ln.split()
        if len(toks) != n + 1:
            raise ParseError(f"expected a label and {n} values, found {len(toks)} fields", k)
        labels.append(toks[0])
        col = ln.index(toks[0]) + len(toks[0])
        for j, tok in enumerate(toks[1:]):
            col = ln.index(tok, col)
            if tok.lower() == "inf":
                x = math.inf
            else:
                try:
                    x = float(tok)
                except ValueError:
                    raise ParseError(f"bad value {tok!r}", k, col + 1) from None
                if not math.isfinite(x):
                    raise ParseError(f"bad value {tok!r}", k, col + 1)
            if x < 0:
                raise ParseError("negative distance", k, col + 1)
            if i == j and x != 0:
                raise ParseError("nonzero diagonal entry", k, col + 1)
            vals[i, j] = x
            col += len(tok)
    if len(set(labels)) != n:
        raise ParseError("duplicate labels", rows[0][0])
    bad = np.argwhere(vals != vals.T)
    if len(bad):
        i, j = bad[0]
        raise AsymmetryError(f"entry ({labels[i]},{labels[j]}) differs from its transpose", rows[i][0])
    return LeafMetric(labels, vals)


def write_dist(d: LeafMetric) -> str:
    out = [str(d.n)]
    for lab, row in zip(d.labels, d.rows()):
        out.append(" ".join([lab] + [fmt_num(x) for x in row]))
    return "\n".join(out) + "\n"


# -- sequences ------------------------------------------------------------------------


def _infer_alphabet(symbols) -> Alphabet:
    s = set(symbols)
    if s <= set(BINARY.symbols):
        return BINARY
    if s <= set(DNA.symbols):
        return DNA
    return Alphabet(tuple(sorted(s)))


def parse_seqs(text: str, alphabet: Optional[Alphabet] = None) -> CharacterMatrix:
    """Records of ``>label`` followed by sequence lines."""
    labels: List[str] = []
    seqs: List[List[str]] = []
    starts: List[int] = []
    for k, ln in enumerate(text.splitlines(), start=1):
        s = ln.strip()
        if not s:
            continue
        if s.startswith(">"):
            lab = s[1:].strip()
            if not lab or len(lab.split()) != 1:
                raise ParseError("record header needs a single label", k, 2)
            if lab in labels:
                raise ParseError(f"duplicate label {lab!r}", k, 2)
            labels.append(lab)
            seqs.append([])
            starts.append(k)
        else:
            if not labels:
                raise ParseError("sequence data before the first header", k, 1)
            gap = next((i for i, c in enumerate(s) if c.isspace()), None)
            if gap is not None:
                raise ParseError("whitespace inside a sequence", k, ln.index(s) + gap + 1)
            seqs[-1].append(s)
    if not labels:
        raise ParseError("no records", 1, 1)
    joined = ["".join(x) for x in seqs]
    k0 = len(joined[0])
    for lab, sq, line in zip(labels, joined, starts):
        if len(sq) != k0:
            raise RaggedLengths(f"record {lab!r} has length {len(sq)}, expected {k0}", line)
    alpha = alphabet or _infer_alphabet(c for sq in joined for c in sq)
    lookup = {c: i for i, c in enumerate(alpha.symbols)}
    data = np.zeros((len(labels), k0), dtype=np.int64)
    for i, (sq, line) in enumerate(zip(joined, starts)):
        for j, ch in enumerate(sq):
            try:
                data[i, j] = lookup[ch]
            except KeyError:
                raise ParseError(f"symbol {ch!r} not in the alphabet", line + 1) from None
    return CharacterMatrix(labels, data, alpha)


def write_seqs(c: CharacterMatrix) -> str:
    return "".join(f">{lab}\n{c.sequence(lab)}\n" for lab in c.labels)
