"""Single-vector baselines: decoder L2, decoder cosine, activation centroid."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ActivationTable, EmpiricalDistribution, FeatureRef, centroid
from .errors import DimensionMismatch, SemotError, ZeroVector
from .transport import GroundCost


@dataclass(frozen=True, eq=False)
class DecoderTable:
    """Decoder directions of one SAE layer, one row per feature (``W_dec[:, i]``).

    ``min_positive`` holds each feature's smallest positive activation over the
    corpus (``nan`` for features that never fire).
    """

    layer: int
    vectors: np.ndarray
    min_positive: np.ndarray | None = None

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vectors, dtype=np.float64))
        if not np.all(np.isfinite(v)):
            raise SemotError("decoder vectors must be finite")
        object.__setattr__(self, "vectors", v)
        if self.min_positive is not None:
            a = np.asarray(self.min_positive, dtype=np.float64)
            if a.shape != (v.shape[0],):
                raise SemotError("min_positive needs one entry per feature")
            if np.any(a[np.isfinite(a)] <= 0):
                raise SemotError("min_positive must be > 0 where defined")
            object.__setattr__(self, "min_positive", a)

    @property
    def n_features(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def with_thresholds(self, activations: ActivationTable) -> "DecoderTable":
        a = np.full(self.n_features, np.nan)
        for i in range(self.n_features):
            f = FeatureRef(self.layer, i)
            if f in activations:
                v = activations.min_positive(f)
                if v is not None:
                    a[i] = v
        return DecoderTable(self.layer, self.vectors, a)

    def live(self) -> np.ndarray:
        """Indices of features with a defined threshold (all, if none were computed)."""
        if self.min_positive is None:
            return np.arange(self.n_features)
        return np.nonzero(np.isfinite(self.min_positive))[0]


@dataclass(frozen=True, eq=False)
class RectDistances:
    rows: tuple[FeatureRef, ...]
    cols: tuple[FeatureRef, ...]
    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "cols", tuple(self.cols))
        e = np.asarray(self.entries, dtype=np.float64)
        if e.shape != (len(self.rows), len(self.cols)):
            raise SemotError("entries shape does not match row/column ids")
        object.__setattr__(self, "entries", e)

    def argmin(self) -> dict[FeatureRef, FeatureRef]:
        """Nearest column for each row, ties to the lowest column."""
        return {r: self.cols[int(np.argmin(self.entries[i]))] for i, r in enumerate(self.rows)}


def _check_dims(targets: DecoderTable, sources: DecoderTable):
    if targets.dim != sources.dim:
        raise DimensionMismatch(f"decoder dims {targets.dim} vs {sources.dim}")


def _ids(table: DecoderTable, idx) -> list[FeatureRef]:
    return [FeatureRef(table.layer, int(i)) for i in idx]


def match_l2(targets: DecoderTable, sources: DecoderTable) -> RectDistances:
    """``|a_min,i W_A[:, i] - a_min,j W_B[:, j]|_2`` over live features."""
    _check_dims(targets, sources)
    ti, si = targets.live(), sources.live()
    x = targets.vectors[ti]
    y = sources.vectors[si]
    if targets.min_positive is not None:
        x = x * targets.min_positive[ti, None]
    if sources.min_positive is not None:
        y = y * sources.min_positive[si, None]
    d = GroundCost.euclidean().pairwise(x, y)
    return RectDistances(_ids(targets, ti), _ids(sources, si), d)


def featflow_cosine(targets: DecoderTable, sources: DecoderTable) -> RectDistances:
    """``1 - cos(W_A[:, i], W_B[:, j])`` over live features."""
    _check_dims(targets, sources)
    ti, si = targets.live(), sources.live()
    x, y = targets.vectors[ti], sources.vectors[si]
    nx, ny = np.linalg.norm(x, axis=1), np.linalg.norm(y, axis=1)
    if np.any(nx == 0) or np.any(ny == 0):
        raise ZeroVector("decoder vector with zero norm")
    sim = (x / nx[:, None]) @ (y / ny[:, None]).T
    return RectDistances(_ids(targets, ti), _ids(sources, si), np.clip(1.0 - sim, 0.0, 2.0))


def naive_centroid_distance(mu: EmpiricalDistribution, nu: EmpiricalDistribution, cost: GroundCost = GroundCost.euclidean()) -> float:
    if mu.dim != nu.dim:
        raise DimensionMismatch(f"dimension {mu.dim} vs {nu.dim}")
    return float(cost.pairwise(centroid(mu)[None], centroid(nu)[None])[0, 0])


def naive_centroid_matrix(
    targets: Sequence[FeatureRef],
    target_dists: Sequence[EmpiricalDistribution],
    sources: Sequence[FeatureRef],
    source_dists: Sequence[EmpiricalDistribution],
    cost: GroundCost = GroundCost.euclidean(),
) -> RectDistances:
    tc = np.stack([centroid(d) for d in target_dists])
    sc = np.stack([centroid(d) for d in source_dists])
    return RectDistances(targets, sources, cost.pairwise(tc, sc))
