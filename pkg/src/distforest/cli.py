"""
Command line interface.

Exit status: 0 on success, 1 when a library contract is violated (or a
verification fails), 2 on usage and parse errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import List, Optional

from .errors import DistForestError, ParseError
from .formats import (
    parse_dist,
    parse_forest,
    parse_newick,
    parse_seqs,
    write_dist,
    write_forest,
    write_newick,
    write_seqs,
)
from .forest_pipeline import alpha_bound, radius, reconstruct_forest, sample_size
from .metric_space import DistortionParams, WeightedTree
from .oracle_verify import lower_bound_instance, sim_classes, verify_forest
from .seq_models import Threshold, cfn_model, distance_matrix, jc_model, simulate

EXIT_OK, EXIT_CONTRACT, EXIT_USAGE = 0, 1, 2


class _UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise _UsageError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _params(args) -> DistortionParams:
    return DistortionParams(args.eps, args.cap, args.f, args.g)


def _weighted(t, what: str) -> WeightedTree:
    if not isinstance(t, WeightedTree):
        raise _UsageError(f"{what} needs branch lengths")
    return t


class RunReport:
    """JSON run summary with a stable key order."""

    def __init__(self, argv: List[str], command: str, seed: Optional[int]):
        self.data = {"command": command, "argv": list(argv), "seed": seed, "parameters": {},
                     "warnings": [], "timing": {}}
        self._t0 = time.perf_counter()

    def finish(self) -> None:
        self.data["timing"]["total_seconds"] = time.perf_counter() - self._t0

    def to_json(self, include_timing: bool = True) -> str:
        data = dict(self.data)
        if not include_timing:
            data.pop("timing", None)
            if isinstance(data.get("stats"), dict):
                data["stats"] = {k: v for k, v in data["stats"].items() if not k.startswith("time_")}
        return json.dumps(data, sort_keys=True, indent=2) + "\n"


# -- commands -------------------------------------------------------------------------


def cmd_simulate(args, rep: RunReport) -> int:
    wt = _weighted(parse_newick(_read(args.tree)), "simulate")
    model = cfn_model(wt) if args.model == "cfn" else jc_model(wt)
    seed = 0 if args.seed is None else args.seed
    chars = simulate(wt.tree, model, args.sites, seed)
    rep.data["parameters"] = {"model": args.model, "sites": args.sites, "seed": seed}
    _write(args.out, write_seqs(chars))
    return EXIT_OK


def cmd_dist(args, rep: RunReport) -> int:
    chars = parse_seqs(_read(args.seqs))
    th = Threshold(args.eps, args.cap)
    dh = distance_matrix(chars, th)
    rep.data["parameters"] = {"eps": args.eps, "cap": args.cap, "sites": chars.k}
    _write(args.out, write_dist(dh))
    return EXIT_OK


def cmd_forest(args, rep: RunReport) -> int:
    dh = parse_dist(_read(args.dist))
    p = _params(args)
    res = reconstruct_forest(dh, p, best_effort=args.best_effort, jobs=args.jobs)
    rep.data["parameters"] = {"eps": p.eps, "cap": p.cap_m, "f": p.f, "g": p.g,
                              "best_effort": args.best_effort}
    summary = res.report(include_timing=False)
    rep.data.update({k: v for k, v in summary.items() if k != "warnings"})
    rep.data["warnings"] = summary["warnings"]
    rep.data["timing"].update({k: v for k, v in res.report()["stats"].items() if k.startswith("time_")})
    _write(args.out, write_forest(res.forest))
    for w in res.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


class _Parsed:
    def __init__(self, trees):
        self.forest = trees
        self.partition = [t.labels for t in trees]
        self.alpha = len(trees)


def cmd_verify(args, rep: RunReport) -> int:
    truth = _weighted(parse_newick(_read(args.truth)), "verify --truth")
    trees = [_weighted(t, "verify --forest") for t in parse_forest(_read(args.forest))]
    p = _params(args)
    out = verify_forest(truth.tree, truth.lengths, _Parsed(trees), p)
    rep.data["parameters"] = {"eps": p.eps, "cap": p.cap_m, "f": p.f, "g": p.g}
    rep.data["verification"] = out.as_dict()
    for check, msg in out.failures:
        print(f"FAIL {check}: {msg}")
    print("verification " + ("passed" if out.ok else f"failed ({len(out.failures)} problems)"))
    return EXIT_OK if out.ok else EXIT_CONTRACT


def cmd_bound(args, rep: RunReport) -> int:
    p = _params(args)
    vals = {
        "radius": radius(p),
        "alpha_bound": alpha_bound(args.n, p),
        "sample_size": sample_size(args.n, p, args.r_conf, args.c),
    }
    rep.data["parameters"] = {"n": args.n, "eps": p.eps, "cap": p.cap_m, "f": p.f, "g": p.g,
                              "r_conf": args.r_conf, "c": args.c}
    rep.data.update(vals)
    for k in ("radius", "alpha_bound", "sample_size"):
        print(f"{k} {vals[k]}")
    return EXIT_OK


def cmd_lowerbound(args, rep: RunReport) -> int:
    t, w, dh = lower_bound_instance(args.levels, args.g, args.cap_levels)
    cap = 2 * args.g * args.cap_levels
    classes = sim_classes(dh, cap)
    prefix = args.out_prefix
    Path(prefix + ".nwk").write_text(write_newick(WeightedTree(t, w)) + "\n")
    Path(prefix + ".dist").write_text(write_dist(dh))
    rep.data["parameters"] = {"levels": args.levels, "g": args.g, "cap_levels": args.cap_levels}
    rep.data.update({"n": t.n, "cap": cap, "classes": len(classes)})
    print(f"n {t.n}")
    print(f"cap {cap}")
    print(f"classes {len(classes)}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--best-effort", action="store_true",
                        help="downgrade ambiguity and glue failures to warnings")
    common.add_argument("--report", default=None, help="write a JSON run report here")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")

    def metric_args(p, need_fg=True):
        p.add_argument("--eps", type=float, required=True, help="accuracy of the estimate")
        p.add_argument("--cap", type=float, required=True, help="cap M")
        if need_fg:
            p.add_argument("--f", type=float, required=True, help="lower edge-length bound")
            p.add_argument("--g", type=float, required=True, help="upper edge-length bound")

    ap = argparse.ArgumentParser(prog="distforest", description="Forest reconstruction from distorted tree metrics.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate characters on a tree")
    p.add_argument("--tree", required=True, help="Newick tree with -log det edge lengths")
    p.add_argument("--model", choices=["cfn", "jc"], default="cfn")
    p.add_argument("--sites", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dist", parents=[common], help="log-det distance matrix from sequences")
    p.add_argument("--seqs", required=True)
    metric_args(p, need_fg=False)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("forest", parents=[common], help="reconstruct a forest from a distance matrix")
    p.add_argument("--dist", required=True)
    metric_args(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_forest)

    p = sub.add_parser("verify", parents=[common], help="check a forest against a true tree")
    p.add_argument("--truth", required=True)
    p.add_argument("--forest", required=True)
    metric_args(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bound", parents=[common], help="forest-size bound and sample size")
    p.add_argument("--n", type=int, required=True)
    metric_args(p)
    p.add_argument("--r-conf", type=float, default=3.0)
    p.add_argument("--c", type=float, default=1.0)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("lowerbound", parents=[common], help="write a lower-bound instance")
    p.add_argument("--levels", type=int, required=True)
    p.add_argument("--g", type=float, default=1.0)
    p.add_argument("--cap-levels", type=int, required=True)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_lowerbound)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    rep = RunReport(argv, args.command, args.seed)
    try:
        code = args.func(args, rep)
    except (_UsageError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DistForestError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    rep.finish()
    if args.report:
        Path(args.report).write_text(rep.to_json())
    return code


if __name__ == "__main__":
    sys.exit(main())
