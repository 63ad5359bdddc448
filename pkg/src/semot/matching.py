"""Cross-layer feature matching with a centroid prefilter.

Each target feature at layer A is compared with source features at layer B.
Both sides are projected into layer A's hidden-state space through token
alignment, source centroids are used to shortlist candidates, and the
Wasserstein distance picks the winner among the shortlist.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    DEFAULT_K,
    TARGET_LAYER,
    ActivationTable,
    EmpiricalDistribution,
    FeatureRef,
    HiddenStateStore,
    ProjectionSpec,
    build_distribution,
    centroid,
)
from .errors import DeadFeature, EmptySources, NegativeEpsilon, SemotError
from .transport import GroundCost, Solver, wasserstein

log = logging.getLogger(__name__)

DEFAULT_TOP_N = 50


@dataclass(frozen=True)
class MatchConfig:
    k: int = DEFAULT_K
    top_n: int | None = DEFAULT_TOP_N  # None: evaluate every source
    cost: GroundCost = field(default_factory=GroundCost.euclidean)
    solver: Solver = field(default_factory=Solver)
    epsilon: float | None = None


@dataclass(frozen=True)
class MatchResult:
    target: FeatureRef
    matched: FeatureRef
    distance: float
    # gap to the runner-up among evaluated candidates; inf with a single candidate
    margin: float
    candidates_evaluated: int
    certified: bool | None = None
    epsilon: float | None = None

    def to_json(self) -> dict:
        out = {
            "target": self.target.to_json(),
            "matched": self.matched.to_json(),
            "distance": self.distance,
            "margin": self.margin if math.isfinite(self.margin) else None,
            "candidates_evaluated": self.candidates_evaluated,
        }
        if self.epsilon is not None:
            out["epsilon"] = self.epsilon
            out["certified"] = self.certified
        return out

    @classmethod
    def from_json(cls, obj) -> "MatchResult":
        margin = obj.get("margin")
        return cls(
            FeatureRef.from_json(obj["target"]),
            FeatureRef.from_json(obj["matched"]),
            float(obj["distance"]),
            math.inf if margin is None else float(margin),
            int(obj["candidates_evaluated"]),
            obj.get("certified"),
            obj.get("epsilon"),
        )


def prefilter_candidates(target_centroid, source_centroids, cost: GroundCost, top_n: int | None = DEFAULT_TOP_N) -> np.ndarray:
    """Positions of the ``top_n`` sources whose centroids are cheapest to reach.

    Ordered by ascending centroid cost, ties by ascending position.
    """
    source_centroids = np.atleast_2d(np.asarray(source_centroids, dtype=np.float64))
    costs = cost.pairwise(np.atleast_2d(target_centroid), source_centroids)[0]
    order = np.lexsort((np.arange(costs.size), costs))
    if top_n is None:
        return order
    return order[:top_n]


def certify_match(result: MatchResult, epsilon: float) -> bool:
    """Sufficient robustness test ``margin > 2 * epsilon``.

    ``epsilon`` bounds the score perturbation of every evaluated source. When
    both the distributions and the ground cost are perturbed, pass the sum of
    the two error bounds. ``False`` does not mean the match is wrong.
    """
    if epsilon < 0:
        raise NegativeEpsilon(f"epsilon must be >= 0, got {epsilon}")
    return bool(result.margin > 2.0 * epsilon)


def select_match(distances: Sequence[float]) -> tuple[int, float, float]:
    """``(argmin, best, margin)`` with ties going to the lowest position."""
    d = np.asarray(distances, dtype=np.float64)
    if d.size == 0:
        raise EmptySources("no candidate distances")
    order = np.lexsort((np.arange(d.size), d))
    best = int(order[0])
    margin = float(d[order[1]] - d[best]) if d.size > 1 else math.inf
    return best, float(d[best]), margin


class FeatureMatcher:
    """Matches target features against a fixed source pool.

    Source distributions and centroids are projected once into the target
    layer and reused across targets.
    """

    def __init__(
        self,
        store: HiddenStateStore,
        activations: ActivationTable,
        sources: Sequence[FeatureRef],
        target_layer: int,
        config: MatchConfig = MatchConfig(),
    ):
        if not sources:
            raise EmptySources("no source features given")
        self.store = store
        self.activations = activations
        self.config = config
        self.spec = ProjectionSpec.target(target_layer)
        self.sources: list[FeatureRef] = []
        self.source_dists: list[EmpiricalDistribution] = []
        for src in sources:
            try:
                dist = build_distribution(store, src, activations, config.k, self.spec)
            except DeadFeature:
                log.warning("source %s never fires; skipped", src)
                continue
            self.sources.append(src)
            self.source_dists.append(dist)
        if not self.sources:
            raise EmptySources("every source feature is dead")
        self.source_centroids = np.stack([centroid(d) for d in self.source_dists])

    def match_distribution(self, target: FeatureRef, dist: EmpiricalDistribution) -> MatchResult:
        cfg = self.config
        picks = prefilter_candidates(centroid(dist), self.source_centroids, cfg.cost, cfg.top_n)
        # evaluate in source order so position ties resolve to the lower source index
        picks = np.sort(picks)
        dists = [wasserstein(cfg.cost, dist, self.source_dists[p], cfg.solver) for p in picks]
        best, distance, margin = select_match(dists)
        result = MatchResult(target, self.sources[picks[best]], distance, margin, len(picks))
        if cfg.epsilon is not None:
            result = MatchResult(
                target, result.matched, distance, margin, len(picks),
                certify_match(result, cfg.epsilon), cfg.epsilon,
            )
        return result

    def match(self, target: FeatureRef) -> MatchResult:
        if target.layer != self.spec.target_layer:
            raise SemotError(
                f"target {target} is not on the reference layer {self.spec.target_layer}"
            )
        dist = build_distribution(self.store, target, self.activations, self.config.k, self.spec)
        return self.match_distribution(target, dist)

    def match_all(self, targets: Sequence[FeatureRef], threads: int = 1, skip_dead: bool = True) -> list[MatchResult]:
        def one(t):
            try:
                return self.match(t)
            except DeadFeature:
                if not skip_dead:
                    raise
                log.warning("target %s never fires; skipped", t)
                return None

        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                results = list(pool.map(one, targets))
        else:
            results = [one(t) for t in targets]
        return [r for r in results if r is not None]


def match_feature(
    target: FeatureRef,
    sources: Sequence[FeatureRef],
    store: HiddenStateStore,
    activations: ActivationTable,
    config: MatchConfig = MatchConfig(),
    spec: ProjectionSpec | None = None,
) -> MatchResult:
    """Nearest source feature to ``target`` in the target layer's space."""
    if spec is not None and (spec.mode != TARGET_LAYER or spec.target_layer != target.layer):
        raise SemotError("matching projects onto the target feature's own layer")
    return FeatureMatcher(store, activations, sources, target.layer, config).match(target)


def match_layers(
    store: HiddenStateStore,
    activations: ActivationTable,
    target_layer: int,
    source_layer: int,
    config: MatchConfig = MatchConfig(),
    threads: int = 1,
) -> list[MatchResult]:
    """Match every live feature of ``target_layer`` against ``source_layer``."""
    matcher = FeatureMatcher(
        store, activations, activations.features(source_layer), target_layer, config
    )
    return matcher.match_all(activations.features(target_layer), threads=threads)
