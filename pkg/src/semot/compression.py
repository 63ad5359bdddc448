"""Circuit compression into supernodes.

Pairwise Wasserstein distances between circuit nodes (projected into the
concatenation of all layers), average-linkage agglomeration down to ``m``
supernodes, the mean within-supernode distance objective, Voronoi assignment
scores against supernode centers, and modular feature groups found by
clustering co-occurrence across many compressed circuits.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np
from sklearn.cluster import KMeans

from .core import (
    DEFAULT_K,
    ActivationTable,
    EmpiricalDistribution,
    FeatureRef,
    HiddenStateStore,
    ProjectionSpec,
    build_distribution,
    centroid,
)
from .errors import (
    DeadFeature,
    DimensionMismatch,
    DisconnectedAndOverclustered,
    InvalidClusterCount,
    SemotError,
    UnknownNode,
)
from .transport import GroundCost, Solver, wasserstein

log = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    ids: tuple[FeatureRef, ...]
    entries: np.ndarray
    dropped: tuple[FeatureRef, ...] = ()

    def __post_init__(self):
        ids = tuple(self.ids)
        d = np.asarray(self.entries, dtype=np.float64)
        n = len(ids)
        if d.shape != (n, n):
            raise SemotError(f"distance matrix shape {d.shape} does not match {n} ids")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise SemotError("distances must be finite and nonnegative")
        if np.any(np.diag(d) != 0):
            raise SemotError("distance matrix diagonal must be exactly zero")
        if np.max(np.abs(d - d.T), initial=0.0) > SYMMETRY_TOL:
            raise SemotError("distance matrix is not symmetric")
        if len(set(ids)) != n:
            raise SemotError("duplicate node ids")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "entries", d)
        object.__setattr__(self, "dropped", tuple(self.dropped))

    @property
    def size(self) -> int:
        return len(self.ids)

    def position(self, node: FeatureRef) -> int:
        try:
            return self.ids.index(node)
        except ValueError:
            raise UnknownNode(f"node {node} not in distance matrix") from None


@dataclass(frozen=True)
class SupernodePartition:
    groups: tuple[tuple[FeatureRef, ...], ...]
    objective: float | None = None

    def __post_init__(self):
        groups = tuple(tuple(sorted(g)) for g in self.groups)
        groups = tuple(sorted(groups, key=lambda g: g[0] if g else FeatureRef(0, 0)))
        seen = set()
        for g in groups:
            if not g:
                raise SemotError("supernodes must be nonempty")
            for node in g:
                if node in seen:
                    raise SemotError(f"node {node} appears in two supernodes")
                seen.add(node)
        object.__setattr__(self, "groups", groups)

    @property
    def nodes(self) -> list[FeatureRef]:
        return sorted(n for g in self.groups for n in g)

    def label_of(self) -> dict[FeatureRef, int]:
        return {n: k for k, g in enumerate(self.groups) for n in g}

    def to_json(self) -> dict:
        return {
            "groups": [[n.to_json() for n in g] for g in self.groups],
            "objective": self.objective,
        }

    @classmethod
    def from_json(cls, obj) -> "SupernodePartition":
        groups = [[FeatureRef.from_json(n) for n in g] for g in obj["groups"]]
        return cls(groups, obj.get("objective"))


@dataclass(frozen=True)
class VoronoiAssignment:
    scores: np.ndarray
    assigned: int
    gamma: float
    feature: FeatureRef | None = None


@dataclass(frozen=True)
class CompressionConfig:
    k: int = DEFAULT_K
    cost: GroundCost = field(default_factory=GroundCost.euclidean)
    solver: Solver = field(default_factory=Solver)


def node_distributions(
    nodes: Sequence[FeatureRef],
    store: HiddenStateStore,
    activations: ActivationTable,
    k: int = DEFAULT_K,
    spec: ProjectionSpec = ProjectionSpec.concat(),
) -> tuple[dict[FeatureRef, EmpiricalDistribution], list[FeatureRef]]:
    """Distributions for the live nodes, plus the list of dead ones."""
    dists, dropped = {}, []
    for node in nodes:
        try:
            dists[node] = build_distribution(store, node, activations, k, spec)
        except DeadFeature:
            log.warning("circuit node %s never fires; dropped", node)
            dropped.append(node)
    return dists, dropped


def distance_matrix(
    dists: Mapping[FeatureRef, EmpiricalDistribution],
    cost: GroundCost = GroundCost.euclidean(),
    solver: Solver = Solver(),
    threads: int = 1,
    dropped: Sequence[FeatureRef] = (),
) -> DistanceMatrix:
    ids = list(dists)
    n = len(ids)
    pairs = list(combinations(range(n), 2))

    def one(pair):
        i, j = pair
        return wasserstein(cost, dists[ids[i]], dists[ids[j]], solver)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            values = list(pool.map(one, pairs))
    else:
        values = [one(p) for p in pairs]
    d = np.zeros((n, n))
    for (i, j), v in zip(pairs, values):
        d[i, j] = v
    d = d + d.T  # each unordered pair is solved once, then mirrored
    return DistanceMatrix(ids, d, dropped)


def pairwise_distances(
    nodes: Sequence[FeatureRef],
    store: HiddenStateStore,
    activations: ActivationTable,
    config: CompressionConfig = CompressionConfig(),
    spec: ProjectionSpec = ProjectionSpec.concat(),
    threads: int = 1,
) -> DistanceMatrix:
    """Wasserstein distances between circuit nodes; dead nodes are dropped."""
    dists, dropped = node_distributions(nodes, store, activations, config.k, spec)
    if len(dists) < 2:
        raise SemotError("need at least two live circuit nodes")
    return distance_matrix(dists, config.cost, config.solver, threads, dropped)


def agglomerate_labels(d: np.ndarray, m: int) -> list[list[int]]:
    """Average-linkage clusters of a precomputed distance matrix, as position lists.

    Clusters live in the slot of their smallest member; among equally close
    pairs the lexicographically smallest slot pair merges first.
    """
    d = np.asarray(d, dtype=np.float64)
    n = d.shape[0]
    if not 1 <= m <= n:
        raise InvalidClusterCount(f"need 1 <= m <= {n}, got {m}")
    link = d.copy()
    np.fill_diagonal(link, np.inf)
    sizes = np.ones(n)
    members = [[i] for i in range(n)]
    active = np.ones(n, dtype=bool)
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    for _ in range(n - m):
        masked = np.where(upper & active[:, None] & active[None, :], link, np.inf)
        i, j = divmod(int(np.argmin(masked)), n)
        merged = (sizes[i] * link[i] + sizes[j] * link[j]) / (sizes[i] + sizes[j])
        link[i, :] = merged
        link[:, i] = merged
        link[i, i] = np.inf
        link[j, :] = np.inf
        link[:, j] = np.inf
        sizes[i] += sizes[j]
        members[i].extend(members[j])
        active[j] = False
    return [sorted(members[i]) for i in range(n) if active[i]]


def supernode_objective(d: DistanceMatrix, partition: SupernodePartition) -> float:
    """Sum over supernodes of the mean ordered-pair distance inside it."""
    total = 0.0
    for group in partition.groups:
        pos = [d.position(node) for node in group]
        size = len(pos)
        if size < 2:
            continue
        block = d.entries[np.ix_(pos, pos)]
        total += block.sum() / (size * (size - 1))
    return float(total)


def agglomerate(d: DistanceMatrix, m: int) -> SupernodePartition:
    clusters = agglomerate_labels(d.entries, m)
    groups = [[d.ids[p] for p in c] for c in clusters]
    part = SupernodePartition(groups)
    return SupernodePartition(part.groups, supernode_objective(d, part))


def voronoi_assign(dist: EmpiricalDistribution, centers, feature: FeatureRef | None = None) -> VoronoiAssignment:
    """Expected Euclidean distance from ``dist`` to each center, and the margin."""
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim == 1:
        centers = centers[:, None]
    if centers.shape[0] < 2:
        raise SemotError("need at least two centers")
    if centers.shape[1] != dist.dim:
        raise DimensionMismatch(f"centers have dimension {centers.shape[1]}, distribution {dist.dim}")
    diff = dist.support[:, None, :] - centers[None, :, :]
    scores = dist.weights @ np.sqrt(np.einsum("tkd,tkd->tk", diff, diff))
    return assignment_from_scores(scores, feature)


def assignment_from_scores(scores, feature: FeatureRef | None = None) -> VoronoiAssignment:
    scores = np.asarray(scores, dtype=np.float64)
    order = np.lexsort((np.arange(scores.size), scores))
    k = int(order[0])
    gamma = float(scores[order[1]] - scores[k])
    return VoronoiAssignment(scores, k, gamma, feature)


def supernode_centers(
    partition: SupernodePartition,
    dists: Mapping[FeatureRef, EmpiricalDistribution],
    mass: Mapping[FeatureRef, float] | None = None,
) -> np.ndarray:
    """One center per supernode: mass-weighted mean of member centroids.

    Each member distribution has unit mass unless ``mass`` says otherwise.
    """
    centers = []
    for group in partition.groups:
        w = np.array([1.0 if mass is None else mass[n] for n in group])
        pts = np.stack([centroid(dists[n]) for n in group])
        centers.append(w @ pts / w.sum())
    return np.stack(centers)


def jaccard_affinity(partitions: Sequence[SupernodePartition]) -> tuple[list[FeatureRef], np.ndarray]:
    """Co-occurrence Jaccard ``co / (cnt_u + cnt_v - co)`` over a set of partitions.

    ``cnt_u`` counts partitions containing ``u``; ``co`` counts partitions
    placing ``u`` and ``v`` in the same supernode.
    """
    nodes = sorted({n for p in partitions for n in p.nodes})
    co = cooccurrence_counts(partitions, nodes).astype(np.float64)
    cnt = np.diag(co).copy()
    denom = cnt[:, None] + cnt[None, :] - co
    jac = np.divide(co, denom, out=np.zeros_like(co), where=denom > 0)
    return nodes, jac


def spectral_labels(affinity: np.ndarray, n_groups: int, seed: int = 0, n_init: int = 50) -> np.ndarray:
    """Normalised-Laplacian embedding followed by k-means++ with fixed seed."""
    a = np.array(affinity, dtype=np.float64)
    np.fill_diagonal(a, 0.0)
    # isolated nodes keep a self-loop so they form their own component
    lonely = a.sum(axis=1) == 0
    a[lonely, lonely] = 1.0
    deg = a.sum(axis=1)
    inv_sqrt = np.divide(1.0, np.sqrt(deg), out=np.zeros_like(deg), where=deg > 0)
    lap = np.eye(a.shape[0]) - inv_sqrt[:, None] * a * inv_sqrt[None, :]
    _, vecs = np.linalg.eigh(lap)
    emb = vecs[:, :n_groups]
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    emb = np.divide(emb, norms, out=np.zeros_like(emb), where=norms > 0)
    km = KMeans(n_clusters=n_groups, init="k-means++", n_init=n_init, random_state=seed)
    return km.fit_predict(emb)


def modular_groups(
    partitions: Sequence[SupernodePartition],
    n_groups: int,
    min_cooccurrence: int = 0,
) -> list[list[FeatureRef]]:
    """Groups of nodes that keep landing in the same supernode across partitions."""
    if len(partitions) < 2:
        raise SemotError("need at least two partitions")
    nodes, jac = jaccard_affinity(partitions)
    if n_groups < 1:
        raise InvalidClusterCount("n_groups must be positive")
    if n_groups > len(nodes):
        raise DisconnectedAndOverclustered(f"{n_groups} groups requested for {len(nodes)} nodes")
    if min_cooccurrence > 0:
        counts = cooccurrence_counts(partitions, nodes)
        jac = np.where(counts >= min_cooccurrence, jac, 0.0)
    labels = spectral_labels(jac, n_groups)
    groups: dict[int, list[FeatureRef]] = {}
    for node, lab in zip(nodes, labels):
        groups.setdefault(int(lab), []).append(node)
    return sorted(groups.values(), key=lambda g: g[0])


def cooccurrence_counts(partitions: Sequence[SupernodePartition], nodes: Sequence[FeatureRef]) -> np.ndarray:
    """``co[u, v]`` partitions with ``u`` and ``v`` in one supernode; the diagonal counts appearances."""
    pos = {n: i for i, n in enumerate(nodes)}
    co = np.zeros((len(nodes), len(nodes)), dtype=np.int64)
    for part in partitions:
        for group in part.groups:
            idx = [pos[u] for u in group]
            co[np.ix_(idx, idx)] += 1
    return co
