#!/usr/bin/env python3
"""Planted-pair accuracy of distributional matching and the single-vector baselines."""
import argparse

from semot.baselines import featflow_cosine, match_l2, naive_centroid_matrix
from semot.core import ProjectionSpec, build_distribution
from semot.errors import DeadFeature
from semot.matching import MatchConfig, match_layers
from semot.synth import MIRROR, MULTIMODAL, UNIMODAL, SynthSpec, generate, planted_accuracy


def naive(corpus, k):
    spec = ProjectionSpec.target(0)
    sides = []
    for layer in (0, 1):
        ids, dists = [], []
        for f in corpus.activations.features(layer):
            try:
                dists.append(build_distribution(corpus.store, f, corpus.activations, k, spec))
            except DeadFeature:
                continue
            ids.append(f)
        sides += [ids, dists]
    return naive_centroid_matrix(*sides).argmin()


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--features", type=int, default=20)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    print(f"{'mode':<16} {'OT':>6} {'naive':>6} {'L2':>6} {'cos':>6}")
    for mode in (UNIMODAL, MULTIMODAL, MIRROR):
        spec = SynthSpec(mode=mode, features_per_layer=args.features, seed=args.seed)
        c = generate(spec)
        res = match_layers(c.store, c.activations, 0, 1, MatchConfig(k=spec.k), threads=args.threads)
        ot = planted_accuracy({r.target: r.matched for r in res}, c.truth)
        tgt = c.decoders[0].with_thresholds(c.activations)
        src = c.decoders[1].with_thresholds(c.activations)
        l2 = planted_accuracy(match_l2(tgt, src).argmin(), c.truth)
        cos = planted_accuracy(featflow_cosine(tgt, src).argmin(), c.truth)
        print(f"{mode:<16} {ot:>6.3f} {planted_accuracy(naive(c, spec.k), c.truth):>6.3f} {l2:>6.3f} {cos:>6.3f}")


if __name__ == "__main__":
    main()
