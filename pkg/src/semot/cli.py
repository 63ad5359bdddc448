"""Command-line entry point: ``semot <command> ...``.

Exit status: 0 on success, 1 on data errors and failed verification, 2 on
usage errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import io, theory
from .baselines import featflow_cosine, match_l2, naive_centroid_matrix
from .compression import (
    CompressionConfig,
    agglomerate,
    modular_groups,
    pairwise_distances,
    supernode_objective,
)
from .core import DEFAULT_K, FeatureRef, ProjectionSpec, build_distribution
from .errors import DeadFeature, SemotError
from .matching import MatchConfig, match_layers
from .synth import SynthSpec, circuit_nodes, generate
from .transport import GroundCost, Solver

log = logging.getLogger("semot")

COSTS = {"euclidean": GroundCost.euclidean, "sqeuclidean": GroundCost.sqeuclidean, "cosine": GroundCost.cosine}
SUITES = ("invariance", "stability", "voronoi", "constants", "recovery")


def default_threads() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def _eps(text):
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad epsilon {text!r}") from None
    if any(not v > 0 for v in parts):
        raise argparse.ArgumentTypeError("epsilon values must be > 0")
    return parts[0] if len(parts) == 1 else tuple(parts)


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _add_solver(p):
    p.add_argument("--k", type=_positive_int, default=DEFAULT_K, help="top-K activations per feature")
    p.add_argument("--solver", choices=("sinkhorn", "exact"), default="sinkhorn")
    p.add_argument("--eps", type=_eps, default=None, help="Sinkhorn epsilon, or a comma-separated annealing schedule")
    p.add_argument("--cost", choices=sorted(COSTS), default="euclidean")
    p.add_argument("--threads", type=_positive_int, default=default_threads())


def _solver(args) -> Solver:
    return Solver(args.solver, eps=args.eps)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semot", description="Distributional SAE feature matching and circuit compression")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic corpus")
    p.add_argument("--spec", help="SynthSpec JSON (defaults if omitted)")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.add_argument("--out", required=True)

    p = sub.add_parser("match", help="match target-layer features against a source layer")
    p.add_argument("--manifest", required=True)
    p.add_argument("--target-layer", type=int, required=True)
    p.add_argument("--source-layer", type=int, required=True)
    p.add_argument("--top-n", type=int, default=50, help="centroid prefilter size; 0 evaluates every source")
    p.add_argument("--epsilon", type=float, default=None, help="certify matches with margin > 2 epsilon")
    p.add_argument("--out", required=True)
    _add_solver(p)

    p = sub.add_parser("compress", help="group circuit nodes into supernodes")
    p.add_argument("--manifest", required=True)
    p.add_argument("--nodes", required=True)
    p.add_argument("--m", type=_positive_int, required=True, help="number of supernodes")
    p.add_argument("--distances", default=None, help="reuse a distance CSV written by `dist`")
    p.add_argument("--out", required=True)
    _add_solver(p)

    p = sub.add_parser("dist", help="pairwise distance matrix over circuit nodes")
    p.add_argument("--manifest", required=True)
    p.add_argument("--nodes", required=True)
    p.add_argument("--out", required=True)
    _add_solver(p)

    p = sub.add_parser("baseline", help="single-vector baseline distances")
    p.add_argument("--kind", choices=("match-l2", "featflow", "naive"), required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--target-layer", type=int, required=True)
    p.add_argument("--source-layer", type=int, required=True)
    p.add_argument("--k", type=_positive_int, default=DEFAULT_K)
    p.add_argument("--out", required=True)

    p = sub.add_parser("modular", help="modular feature groups across partitions")
    p.add_argument("--partitions", nargs="+", required=True)
    p.add_argument("--groups", type=_positive_int, required=True)
    p.add_argument("--min-cooccurrence", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("--suite", choices=SUITES, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=_positive_int, default=None, help="trials (per T for voronoi)")
    p.add_argument("--threads", type=_positive_int, default=default_threads())
    p.add_argument("--out", required=True)
    return parser


# ---------------------------------------------------------------------------


def cmd_gen(args):
    spec = SynthSpec()
    if args.spec:
        with open(args.spec) as fh:
            spec = SynthSpec.from_json(json.load(fh))
    if args.seed is not None:
        spec = SynthSpec.from_json({**spec.to_json(), "seed": args.seed})
    corpus = generate(spec)
    path = io.write_corpus(args.out, corpus.store, corpus.activations, corpus.decoders)
    truth = {
        "version": io.VERSION,
        "spec": spec.to_json(),
        "pairs": [[str(t), str(s)] for t, s in sorted(corpus.truth.pairs.items())],
        "supernodes": [[str(n) for n in g] for g in corpus.truth.supernodes],
    }
    io._dump(os.path.join(args.out, "truth.json"), truth)
    nodes = circuit_nodes(spec) or corpus.activations.features()
    io.write_nodes(os.path.join(args.out, "nodes.json"), nodes)
    print(path)


def cmd_match(args):
    store, acts = io.load_corpus(args.manifest)
    cfg = MatchConfig(
        k=args.k,
        top_n=args.top_n if args.top_n > 0 else None,
        cost=COSTS[args.cost](),
        solver=_solver(args),
        epsilon=args.epsilon,
    )
    results = match_layers(store, acts, args.target_layer, args.source_layer, cfg, threads=args.threads)
    io.write_matches(args.out, results)
    print(f"{len(results)} matches -> {args.out}")


def _distances(args, nodes):
    store, acts = io.load_corpus(args.manifest)
    cfg = CompressionConfig(args.k, COSTS[args.cost](), _solver(args))
    return pairwise_distances(nodes, store, acts, cfg, ProjectionSpec.concat(), threads=args.threads)


def cmd_dist(args):
    d = _distances(args, io.read_nodes(args.nodes))
    io.write_distance_csv(args.out, d)
    for node in d.dropped:
        print(f"dropped dead node {node}", file=sys.stderr)
    print(f"{d.size}x{d.size} -> {args.out}")


def cmd_compress(args):
    nodes = io.read_nodes(args.nodes)
    if args.distances:
        d = io.read_distance_csv(args.distances)
        missing = set(nodes) - set(d.ids)
        if missing:
            raise SemotError(f"distance CSV lacks nodes {sorted(map(str, missing))}")
    else:
        d = _distances(args, nodes)
    part = agglomerate(d, args.m)
    io.write_partition(args.out, part)
    print(f"{len(part.groups)} supernodes, objective {supernode_objective(d, part):.6g} -> {args.out}")


def cmd_baseline(args):
    if args.kind == "naive":
        store, acts = io.load_corpus(args.manifest)
        spec = ProjectionSpec.target(args.target_layer)

        def live(layer):
            ids, dists = [], []
            for f in acts.features(layer):
                try:
                    dists.append(build_distribution(store, f, acts, args.k, spec))
                except DeadFeature:
                    continue
                ids.append(f)
            if not ids:
                raise SemotError(f"layer {layer} has no live features")
            return ids, dists

        r = naive_centroid_matrix(*live(args.target_layer), *live(args.source_layer))
    else:
        store, acts = io.load_corpus(args.manifest)
        dec = io.load_decoders(args.manifest)
        for layer in (args.target_layer, args.source_layer):
            if layer not in dec:
                raise SemotError(f"manifest lists no decoder table for layer {layer}")
        tgt = dec[args.target_layer].with_thresholds(acts)
        src = dec[args.source_layer].with_thresholds(acts)
        r = match_l2(tgt, src) if args.kind == "match-l2" else featflow_cosine(tgt, src)
    io.write_rect_csv(args.out, r)
    print(f"{len(r.rows)}x{len(r.cols)} -> {args.out}")


def cmd_modular(args):
    parts = [io.read_partition(p) for p in args.partitions]
    groups = modular_groups(parts, args.groups, args.min_cooccurrence)
    io.write_groups(args.out, groups)
    print(f"{len(groups)} groups -> {args.out}")


def cmd_verify(args) -> int:
    kw = {"seed": args.seed, "threads": args.threads}
    if args.trials is not None:
        kw["trials"] = args.trials
    if args.suite == "voronoi":
        exp = theory.run_voronoi_experiment(**kw)
        exp.write(args.out)
        report = theory.voronoi_report(exp)
        report.write(args.out)
    else:
        fn = {
            "invariance": theory.run_invariance_suite,
            "stability": theory.run_stability_suite,
            "constants": theory.run_constants_suite,
            "recovery": theory.run_recovery_suite,
        }[args.suite]
        report = fn(**kw)
        report.write(args.out)
    status = "PASS" if report.passed else "FAIL"
    print(f"{status} {report.name}: {report.violations} violations in {report.trials} trials")
    return 0 if report.passed else 1


COMMANDS = {
    "gen": cmd_gen,
    "match": cmd_match,
    "compress": cmd_compress,
    "dist": cmd_dist,
    "baseline": cmd_baseline,
    "modular": cmd_modular,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args) or 0
    except (SemotError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
