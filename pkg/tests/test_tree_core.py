import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distforest.errors import IncompatibleSplits, IncompleteSplits, InvalidTarget, InvalidTree, UnknownLabel
from distforest.formats import parse_newick
from distforest.oracle_verify import (
    as_pairs,
    brute_ell_bar,
    brute_path,
    enumerate_trees,
    oracle_restrict_splits,
    oracle_splits,
    random_tree,
)
from distforest.tree_core import (
    AttachLeaf,
    BridgeEdges,
    DirectedEdge,
    Forest,
    JoinLeaves,
    Split,
    Tree,
    apply_edge_add,
    directed_edge_leaf_distance,
    edge_leaf_distance,
    leaf_path,
    restrict,
    same_topology,
    splits,
    tree_from_splits,
)


def S(a, b):
    return Split(frozenset(a), frozenset(b))


def topo(text):
    return parse_newick(text)


def leaf(label):
    return Tree({0: ()}, {0: label})


def pair(u, v):
    return Tree({0: [1], 1: [0]}, {0: u, 1: v})


# -- construction ----------------------------------------------------------------


def test_tree_rejects_degree_two():
    with pytest.raises(InvalidTree):
        Tree({0: [1], 1: [0, 2], 2: [1]}, {0: "a", 2: "b"})


def test_tree_rejects_cycle():
    adj = {0: [1, 2, 3], 1: [0, 2, 4], 2: [0, 1, 5], 3: [0], 4: [1], 5: [2]}
    with pytest.raises(InvalidTree):
        Tree(adj, {3: "a", 4: "b", 5: "c"})


def test_tree_rejects_duplicate_labels():
    with pytest.raises(InvalidTree):
        Tree({0: [1], 1: [0]}, {0: "a", 1: "a"})


def test_split_is_unordered():
    assert S("ab", "cd") == S("cd", "ab")
    assert hash(S("ab", "cd")) == hash(S("dc", "ba"))


# -- splits ----------------------------------------------------------------------


def test_quartet_splits():
    t = topo("((a,b),(c,d));")
    want = {S("ab", "cd")} | {S(x, set("abcd") - {x}) for x in "abcd"}
    assert splits(t) == want


def test_star_has_trivial_splits_only():
    t = topo("(a,b,c);")
    assert splits(t) == {S("a", "bc"), S("b", "ac"), S("c", "ab")}


def test_caterpillar_nontrivial_splits():
    t = topo("(a,(b,(c,(d,(e,f)))));")
    nontrivial = {s for s in splits(t) if not s.is_trivial}
    assert len(nontrivial) == 3
    oracle = {x for x in oracle_splits(t) if min(len(x[0]), len(x[1])) > 1}
    assert as_pairs(nontrivial) == oracle


@given(st.integers(2, 40), st.integers(0, 10**9))
@settings(max_examples=60, deadline=None)
def test_split_count_is_edge_count(n, seed):
    t = random_tree(n, random.Random(seed))
    assert len(splits(t)) == len(t.edges) == 2 * n - 3


@given(st.integers(2, 30), st.integers(0, 10**9))
@settings(max_examples=60, deadline=None)
def test_splits_match_edge_deletion_oracle(n, seed):
    t = random_tree(n, random.Random(seed))
    assert as_pairs(splits(t)) == oracle_splits(t)


# -- tree_from_splits ------------------------------------------------------------


def test_tree_from_quartet_split():
    t = tree_from_splits([S("ab", "cd")], "abcd")
    assert splits(t) == splits(topo("((a,b),(c,d));"))


def test_crossing_splits_rejected():
    with pytest.raises(IncompatibleSplits):
        tree_from_splits([S("ab", "cd"), S("ac", "bd")], "abcd")


def test_unresolved_splits_rejected():
    with pytest.raises(IncompleteSplits):
        tree_from_splits([], "abcd")
    with pytest.raises(IncompleteSplits):
        tree_from_splits([S("ab", "cdef")], "abcdef")


@pytest.mark.parametrize("n", [3, 4, 5, 6, 7])
def test_roundtrip_exhaustive(n):
    for t in enumerate_trees(n):
        assert splits(tree_from_splits(splits(t), t.labels)) == splits(t)


def test_roundtrip_random_large():
    rng = random.Random(7)
    for _ in range(1000):
        t = random_tree(rng.randint(3, 64), rng)
        assert same_topology(tree_from_splits(splits(t), t.labels), t)


def test_tiny_trees():
    assert tree_from_splits([], "a").n == 1
    t = tree_from_splits([S("a", "b")], "ab")
    assert t.n == 2 and len(t.edges) == 1


# -- restrict ----------------------------------------------------------------------


def test_restrict_identity(rng):
    t = random_tree(12, rng)
    assert same_topology(restrict(t, t.labels), t)


def test_restrict_quartet_to_star():
    t = restrict(topo("((a,b),(c,d));"), "abc")
    assert splits(t) == splits(topo("(a,b,c);"))


def test_restrict_unknown_label():
    with pytest.raises(UnknownLabel):
        restrict(topo("((a,b),(c,d));"), "abz")


def test_restrict_singleton():
    t = restrict(topo("((a,b),(c,d));"), "c")
    assert t.n == 1 and t.labels == {"c"}


@given(st.integers(3, 10), st.integers(0, 10**9))
@settings(max_examples=80, deadline=None)
def test_restrict_composes(n, seed):
    r = random.Random(seed)
    t = random_tree(n, r)
    labs = sorted(t.labels)
    outer = set(r.sample(labs, r.randint(1, n)))
    inner = set(r.sample(sorted(outer), r.randint(1, len(outer))))
    twice = restrict(restrict(t, outer), inner)
    once = restrict(t, inner)
    assert splits(twice) == splits(once)
    assert as_pairs(splits(once)) == oracle_restrict_splits(t, inner)


# -- paths and leaf distances ----------------------------------------------------------


def test_leaf_path_cherry():
    t = topo("((u,v),(c,d));")
    u, v = t.node("u"), t.node("v")
    w = t.neighbors(u)[0]
    assert leaf_path(t, "u", "v") == [(u, w), (w, v)]


def test_leaf_path_empty_and_unknown():
    t = topo("((u,v),(c,d));")
    assert leaf_path(t, "u", "u") == []
    with pytest.raises(UnknownLabel):
        leaf_path(t, "u", "zz")


@given(st.integers(2, 25), st.integers(0, 10**9))
@settings(max_examples=60, deadline=None)
def test_leaf_path_matches_brute(n, seed):
    r = random.Random(seed)
    t = random_tree(n, r)
    u, v = r.choice(sorted(t.labels)), r.choice(sorted(t.labels))
    p = leaf_path(t, u, v)
    assert {frozenset(e) for e in p} == set(brute_path(t, u, v))
    assert len(p) == len(brute_path(t, u, v))


def test_pendant_edge_toward_leaf():
    t = topo("((a,b),(c,d));")
    a = t.node("a")
    w = t.neighbors(a)[0]
    # the path consists of the edge itself, which is one edge long
    assert directed_edge_leaf_distance(t, DirectedEdge(w, a)) == 1
    assert directed_edge_leaf_distance(t, DirectedEdge(a, w)) == 2


def test_leaf_edge_far_from_other_leaves():
    t = topo("(u,((a,b),(c,d)));")
    u = t.node("u")
    v = t.neighbors(u)[0]
    assert directed_edge_leaf_distance(t, DirectedEdge(u, v)) == 3
    assert directed_edge_leaf_distance(t, DirectedEdge(v, u)) == 1
    assert edge_leaf_distance(t, (u, v)) == 3


def test_directed_edge_missing():
    t = topo("((a,b),(c,d));")
    with pytest.raises(InvalidTarget):
        directed_edge_leaf_distance(t, DirectedEdge(t.node("a"), t.node("b")))


@given(st.integers(3, 12), st.integers(0, 10**9))
@settings(max_examples=40, deadline=None)
def test_directed_distance_matches_path_search(n, seed):
    r = random.Random(seed)
    t = random_tree(n, r)
    for a, b in t.edges:
        for tail, head in ((a, b), (b, a)):
            assert directed_edge_leaf_distance(t, DirectedEdge(tail, head)) == brute_ell_bar(t, tail, head)


# -- edge adding ------------------------------------------------------------------------


def test_join_two_leaves():
    f = apply_edge_add(Forest([leaf("u"), leaf("v")]), JoinLeaves("u", "v"))
    assert len(f) == 1
    (t,) = f.trees
    assert t.labels == {"u", "v"} and len(t.edges) == 1


def test_attach_leaf_into_edge():
    f = apply_edge_add(Forest([pair("u", "v"), leaf("w")]), AttachLeaf(frozenset({"u"}), "w"))
    (t,) = f.trees
    assert len(t.edges) == 3
    assert splits(t) == splits(topo("(u,v,w);"))
    centre = [v for v in t.nodes if not t.is_leaf(v)]
    assert len(centre) == 1 and t.degree(centre[0]) == 3


def test_bridge_two_edges():
    f = apply_edge_add(Forest([pair("u1", "v1"), pair("u2", "v2")]),
                       BridgeEdges(frozenset({"u1"}), frozenset({"v2"})))
    (t,) = f.trees
    assert len(t.edges) == 5
    assert S({"u1", "v1"}, {"u2", "v2"}) in splits(t)


def test_edge_add_invalid_targets():
    f = Forest([pair("u", "v"), leaf("w")])
    with pytest.raises(InvalidTarget):
        apply_edge_add(f, JoinLeaves("u", "w"))
    with pytest.raises(InvalidTarget):
        apply_edge_add(f, AttachLeaf(frozenset({"q"}), "w"))
    with pytest.raises(InvalidTarget):
        apply_edge_add(f, AttachLeaf(frozenset({"u"}), "v"))
    with pytest.raises(InvalidTarget):
        apply_edge_add(Forest([pair("u", "v")]), BridgeEdges(frozenset({"u"}), frozenset({"v"})))


def test_forest_needs_disjoint_labels():
    with pytest.raises(InvalidTree):
        Forest([leaf("a"), pair("a", "b")])


@given(st.integers(0, 10**9))
@settings(max_examples=50, deadline=None)
def test_edge_add_reduces_components(seed):
    r = random.Random(seed)
    labs = [f"l{i}" for i in range(r.randint(2, 14))]
    r.shuffle(labs)
    cut = r.randint(1, len(labs) - 1)
    left = random_tree(cut, r, labs[:cut]) if cut > 1 else leaf(labs[0])
    right = random_tree(len(labs) - cut, r, labs[cut:]) if len(labs) - cut > 1 else leaf(labs[cut])
    extra = leaf("zz")
    f = Forest([left, right, extra])

    def some_edge(t):
        if t.n == 1:
            return None
        return frozenset(t.edge_sides()[r.choice(t.edges)])

    e1, e2 = some_edge(left), some_edge(right)
    if e1 is not None and e2 is not None:
        op = BridgeEdges(e1, e2)
    elif e1 is not None:
        op = AttachLeaf(e1, labs[cut])
    elif e2 is not None:
        op = AttachLeaf(e2, labs[0])
    else:
        op = JoinLeaves(labs[0], labs[1])
    g = apply_edge_add(f, op)
    assert len(g) == len(f) - 1
    assert g.labels == f.labels
    for t in g.trees:
        assert all(t.degree(v) in (1, 3) for v in t.nodes if not (t.n == 2 or t.n == 1))
