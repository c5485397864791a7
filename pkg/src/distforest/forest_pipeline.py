"""
The forest reconstruction pipeline: balls, sharing graph, components,
local trees and glue.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Sequence

from .disjointness import SharingGraph, connected_components, edge_sharing
from .errors import (
    AmbiguousQuartet,
    GlueError,
    InconsistentLocalTrees,
    InvalidMetric,
    NonPositiveLength,
    PartitionConflict,
)
from .local_builder import _quartet_choice, build_tree
from .metric_space import DistortionParams, LeafMetric, WeightedTree
from .supertree_glue import SharingCollection, glue_report


def radius(p: DistortionParams) -> float:
    """Ball radius ``(M - 7 eps) / 6``."""
    return (p.cap_m - 7 * p.eps) / 6


def alpha_bound(n: int, p: DistortionParams) -> int:
    """Upper bound on the number of output trees for ``n`` leaves."""
    return math.floor(1 + (60 * n / math.sqrt(2)) * 2.0 ** (-(p.cap_m - p.eps) / (2 * p.g)))


def sample_size(n: int, p: DistortionParams, r_conf: float, c: float) -> int:
    """Sequence length sufficient for an (eps, M) distortion from log-det
    distances with failure probability ``O(n**(2 - r_conf))``."""
    if not r_conf > 2 or not c > 0:
        raise ValueError("need r_conf > 2 and c > 0")
    e, m = p.eps, p.cap_m
    return math.ceil(c * r_conf * math.exp(2 * m + 2 * e) * math.log(n) / (1 - math.exp(-2 * e)) ** 2)


@dataclass
class ForestResult:
    partition: List[FrozenSet[str]]
    forest: List[WeightedTree]
    alpha: int
    radius: float
    bound_certificate: int
    warnings: List[str] = field(default_factory=list)
    component_sizes: List[int] = field(default_factory=list)
    stats: Dict[str, float] = field(default_factory=dict)

    def report(self, include_timing: bool = True) -> dict:
        """Plain-data run summary (suitable for JSON)."""
        stats = dict(self.stats)
        if not include_timing:
            stats = {k: v for k, v in stats.items() if not k.startswith("time_")}
        return {
            "alpha": self.alpha,
            "radius": self.radius,
            "bound_certificate": self.bound_certificate,
            "within_bound": self.alpha <= self.bound_certificate,
            "component_sizes": list(self.component_sizes),
            "warnings": list(self.warnings),
            "stats": stats,
        }


# -- pair tests ----------------------------------------------------------------


def _quartet_disjoint(D, m1: Sequence[int], m2: Sequence[int], strict: bool) -> bool:
    """For disjoint index sets of size >= 2: whether ``m1 | m2`` is a split
    of the tree on their union, checked by anchored quartets."""
    a, b = m1[0], m2[0]
    for x in m1[1:]:
        for y in m2[1:]:
            if _quartet_choice(D, a, x, b, y, strict=strict) != 0:
                return False
    return True


def _pair_sharing(dh: LeafMetric, labels: Sequence[str], s1: List[int], s2: List[int],
                  method: str, best_effort: bool) -> bool:
    if method == "quartet":
        return not _quartet_disjoint(dh.rows(), s1, s2, strict=not best_effort)
    l1 = [labels[i] for i in s1]
    l2 = [labels[i] for i in s2]
    t = build_tree(dh, l1 + l2, best_effort=best_effort).tree
    return edge_sharing(t, l1, l2)


def _pair_chunk(args):
    dh, labels, balls, pairs, method, best_effort = args
    return [(i, j) for i, j in pairs
            if _pair_sharing(dh, labels, balls[i], balls[j], method, best_effort)]


def _component_chunk(args):
    dh, jobs, eps, best_effort = args
    return [_solve_component(dh, *job, eps=eps, best_effort=best_effort) for job in jobs]


def _solve_component(dh, block, sets, nbhd, eps, best_effort):
    """Local trees plus glue for one component; returns (tree, warnings)."""
    warnings = []
    try:
        local = []
        for b in range(len(sets)):
            sl = frozenset().union(*(sets[g] for g in nbhd[b]))
            local.append(build_tree(dh, sl, best_effort=best_effort))
        c = SharingCollection(sets, nbhd, local)
        res = glue_report(c, eps)
        return [res.tree], res.flags
    except (GlueError, InconsistentLocalTrees, AmbiguousQuartet, NonPositiveLength) as exc:
        if not best_effort:
            raise
        warnings.append(f"component containing {min(block)}: {type(exc).__name__}: {exc}; "
                        "fell back to per-ball trees")
    # fallback: each leaf goes to the first ball that holds it
    seen = set()
    trees = []
    for s in sets:
        part = sorted(set(s) - seen)
        seen |= set(part)
        if part:
            trees.append(build_tree(dh, part, best_effort=True))
    return trees, warnings


def _chunks(items, k):
    k = max(1, k)
    size = max(1, math.ceil(len(items) / k))
    return [items[i:i + size] for i in range(0, len(items), size)]


# -- the pipeline ----------------------------------------------------------------


def reconstruct_forest(
    dh: LeafMetric,
    p: DistortionParams,
    best_effort: bool = False,
    jobs: int = 1,
    pair_test: str = "quartet",
) -> ForestResult:
    """Reconstruct a forest of restricted trees from a distorted metric.

    Parameters
    ----------
    dh : LeafMetric
        Symmetric estimate; ``inf`` marks unknown distances.
    p : DistortionParams
    best_effort : bool
        Downgrade ambiguous quartets and glue failures to warnings.
    jobs : int
        Worker processes for the pair tests and per-component work.  The
        result does not depend on it.
    pair_test : {"quartet", "tree"}
        How a pair of balls that passes the cap filter is tested:
        anchored quartets on the two sets, or a tree built on their union
        followed by an edge-sharing scan.  Both agree on genuine inputs.

    Returns
    -------
    ForestResult
    """
    if pair_test not in ("quartet", "tree"):
        raise ValueError("pair_test must be 'quartet' or 'tree'")
    if not dh.is_symmetric():
        raise InvalidMetric("the distance estimate must be symmetric")
    t0 = time.perf_counter()
    r = radius(p)
    cap = p.cap_m
    labels = sorted(dh.labels)
    n = len(labels)
    # reorder once so that index i <-> labels[i]
    dh = dh.submetric_ordered(labels) if list(dh.labels) != labels else dh
    D = dh.rows()

    # (2) balls, deduplicated, in centre label order
    balls: List[List[int]] = []
    masks: List[int] = []
    seen_masks = set()
    for i in range(n):
        row = D[i]
        members = [j for j in range(n) if row[j] <= r or j == i]
        m = 0
        for j in members:
            m |= 1 << j
        if m not in seen_masks:
            seen_masks.add(m)
            balls.append(members)
            masks.append(m)
    a = len(balls)

    # (3) sharing graph with the cap pre-filter
    near = []
    for i in range(n):
        m = 0
        row = D[i]
        for j in range(n):
            if row[j] <= cap:
                m |= 1 << j
        near.append(m)
    reach = []
    for members in balls:
        m = -1
        for u in members:
            m &= near[u]
        reach.append(m)
    pairs_sharing = []
    to_test = []
    n_filtered = n_short = 0
    for i in range(a):
        for j in range(i + 1, a):
            if len(balls[i]) < 2 or len(balls[j]) < 2:
                n_short += 1
                continue
            if masks[i] & masks[j]:
                n_short += 1
                pairs_sharing.append((i, j))
                continue
            if masks[j] & reach[i] != masks[j]:
                n_filtered += 1
                continue
            to_test.append((i, j))
    t1 = time.perf_counter()
    if jobs > 1 and len(to_test) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = ex.map(_pair_chunk, [(dh, labels, balls, ch, pair_test, best_effort)
                                         for ch in _chunks(to_test, jobs * 4)])
            tested = [x for part in parts for x in part]
    else:
        tested = _pair_chunk((dh, labels, balls, to_test, pair_test, best_effort))
    pairs_sharing.extend(tested)
    g = SharingGraph(a, pairs_sharing)
    t2 = time.perf_counter()

    # (4) components and their leaf blocks
    comps = connected_components(g)
    blocks = []
    for comp in comps:
        m = 0
        for b in comp:
            m |= masks[b]
        blocks.append(m)
    acc = 0
    for m in blocks:
        if acc & m:
            raise PartitionConflict("two components of the sharing graph share a leaf")
        acc |= m

    # (5)-(6) local trees and glue, per component
    work = []
    for comp in comps:
        idx = {b: k for k, b in enumerate(comp)}
        sets = [frozenset(labels[j] for j in balls[b]) for b in comp]
        nbhd = [frozenset([idx[b]] + [idx[x] for x in g.neighbors(b)]) for b in comp]
        block = frozenset().union(*sets)
        work.append((block, sets, nbhd))
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = ex.map(_component_chunk, [(dh, ch, p.eps, best_effort)
                                              for ch in _chunks(work, jobs * 2)])
            solved = [x for part in parts for x in part]
    else:
        solved = _component_chunk((dh, work, p.eps, best_effort))
    t3 = time.perf_counter()

    forest: List[WeightedTree] = []
    warnings: List[str] = []
    for trees, flags in solved:
        forest.extend(trees)
        warnings.extend(flags)
    forest.sort(key=lambda wt: min(wt.labels))
    partition = [wt.labels for wt in forest]
    alpha = len(forest)
    bound = alpha_bound(n, p)
    if alpha > bound:
        warnings.append(f"alpha={alpha} exceeds the certified bound {bound}")
    stats = {
        "n": n,
        "balls": a,
        "pairs_total": a * (a - 1) // 2,
        "pairs_shortcut": n_short,
        "pairs_filtered": n_filtered,
        "pairs_tested": len(to_test),
        "sharing_edges": len(pairs_sharing),
        "time_balls_graph": t2 - t0,
        "time_pair_tests": t2 - t1,
        "time_local_glue": t3 - t2,
    }
    return ForestResult(
        partition=partition,
        forest=forest,
        alpha=alpha,
        radius=r,
        bound_certificate=bound,
        warnings=warnings,
        component_sizes=[len(x) for x in partition],
        stats=stats,
    )
