"""Shared builders for the test modules."""

import math

import numpy as np

from distforest.formats import parse_newick
from distforest.metric_space import WeightedTree
from distforest.oracle_verify import brute_path_nodes, random_lengths, random_tree
from distforest.seq_models import determinant, exact_joint


def quartet():
    return parse_newick("((a:1,b:1):0.5,(c:1,d:1):0.5);")


def random_weighted(n, rng, lo=0.5, hi=2.0):
    t = random_tree(n, rng)
    return WeightedTree(t, random_lengths(t, lo, hi, rng))


# -- sharing collections built from oracles -----------------------------------------


def oracle_local(t, w, labels, edge_splits=None):
    """The weighted restriction of ``(t, w)`` to ``labels``, from oracle splits."""
    from distforest.metric_space import weighted_from_splits
    from distforest.oracle_verify import oracle_restrict_lengths
    from distforest.tree_core import Split, Tree

    labels = frozenset(labels)
    if len(labels) == 1:
        return WeightedTree(Tree({0: ()}, {0: next(iter(labels))}), {})
    lens = oracle_restrict_lengths(t, w, labels, edge_splits)
    return weighted_from_splits({Split(a, b): x for (a, b), x in lens.items()}, labels)


def clustered_set(t, rng, size):
    """Up to ``size`` leaves nearest (in edges) to a random leaf."""
    from distforest.oracle_verify import brute_path

    labs = sorted(t.labels)
    centre = rng.choice(labs)
    order = sorted(labs, key=lambda x: (len(brute_path(t, centre, x)), rng.random()))
    return frozenset(order[:size])


def oracle_collection(rng, n, max_sets=8, max_size=6):
    """A random edge-sharing collection on a random weighted tree.

    Returns ``(collection, tree, lengths, union)``; every ingredient (the
    sharing relation, the local trees) comes from the oracle module.
    """
    from distforest.oracle_verify import PathTable, oracle_edge_splits
    from distforest.supertree_glue import SharingCollection

    wt = random_weighted(n, rng)
    t, w = wt.tree, wt.lengths
    labs = sorted(t.labels)
    k = rng.randint(1, max_sets)
    sets = []
    for _ in range(k):
        size = rng.randint(2, min(max_size, n))
        sets.append(clustered_set(t, rng, size) if rng.random() < 0.5 else frozenset(rng.sample(labs, size)))
    table = PathTable(t)
    share = {(i, j) for i in range(k) for j in range(k)
             if i == j or not table.edge_disjoint(sets[i], sets[j])}
    comp, queue = {0}, [0]
    for x in queue:
        for y in range(k):
            if (x, y) in share and y not in comp:
                comp.add(y)
                queue.append(y)
    comp = sorted(comp)
    idx = {b: i for i, b in enumerate(comp)}
    leaf_sets = [sets[b] for b in comp]
    nbhd = [frozenset(idx[g] for g in comp if (b, g) in share) for b in comp]
    es = oracle_edge_splits(t)
    local = [oracle_local(t, w, frozenset().union(*(leaf_sets[g] for g in nb)), es) for nb in nbhd]
    union = frozenset().union(*leaf_sets)
    return SharingCollection(leaf_sets, nbhd, local), t, w, union


def nni(wt, rng):
    """Swap two subtrees across a random internal edge; lengths travel with
    the subtrees.  Returns None when the tree has no internal edge."""
    from distforest.tree_core import Tree, canonical_edge

    t = wt.tree
    inner = [e for e in t.edges if not t.is_leaf(e[0]) and not t.is_leaf(e[1])]
    if not inner:
        return None
    a, b = rng.choice(inner)
    x = rng.choice([v for v in t.neighbors(a) if v != b])
    y = rng.choice([v for v in t.neighbors(b) if v != a])
    adj = {v: list(t.neighbors(v)) for v in t.nodes}
    adj[a][adj[a].index(x)] = y
    adj[b][adj[b].index(y)] = x
    adj[x][adj[x].index(a)] = b
    adj[y][adj[y].index(b)] = a
    lens = wt.lengths
    lx = lens.pop(canonical_edge(a, x))
    ly = lens.pop(canonical_edge(b, y))
    lens[canonical_edge(b, x)] = lx
    lens[canonical_edge(a, y)] = ly
    return WeightedTree(Tree(adj, t.leaf_labels()), lens)


def logdet_path_gap(t, m, u, v):
    """|log det F - log det diag(pi_w) - sum log det M(e)| for the pair u, v."""
    path = brute_path_nodes(t, u, v)
    # node of the path closest to the root, by walking parents from the root side
    depth = {}
    for x in m.order:
        depth[x] = 0 if m.parent[x] is None else depth[m.parent[x]] + 1
    w = min(path, key=depth.__getitem__)
    dist = np.array(m.pi)
    chain = []
    x = w
    while m.parent[x] is not None:
        chain.append((m.parent[x], x))
        x = m.parent[x]
    for a, b in reversed(chain):
        dist = dist @ m.matrix(a, b)
    total = sum(math.log(x) for x in dist)
    for a, b in zip(path, path[1:]):
        total += math.log(determinant(m.matrix(a, b)))
    return abs(math.log(exact_joint(t, m, u, v).det) - total)
