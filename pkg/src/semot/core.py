"""Domain types and activation-weighted empirical distributions.

A feature is turned into a probability distribution by selecting the tokens
where it fires most strongly, normalising those activations into weights and
placing the weights on the hidden states of the selected tokens in some
reference space.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    DeadFeature,
    EmptyInput,
    LayerMismatch,
    NonPositiveValue,
    SemotError,
)

DEFAULT_K = 32

IDENTITY = "identity"
TARGET_LAYER = "target-layer-alignment"
CONCAT = "all-layer-concatenation"
_MODES = (IDENTITY, TARGET_LAYER, CONCAT)


@dataclass(frozen=True, order=True)
class FeatureRef:
    layer: int
    index: int

    def __post_init__(self):
        if self.layer < 0 or self.index < 0:
            raise SemotError(f"negative feature reference {self.layer}:{self.index}")

    def __str__(self):
        return f"{self.layer}:{self.index}"

    @classmethod
    def parse(cls, text: str) -> "FeatureRef":
        layer, index = text.split(":")
        return cls(int(layer), int(index))

    def to_json(self) -> dict:
        return {"layer": self.layer, "index": self.index}

    @classmethod
    def from_json(cls, obj) -> "FeatureRef":
        if isinstance(obj, str):
            return cls.parse(obj)
        return cls(int(obj["layer"]), int(obj["index"]))


@dataclass(frozen=True)
class ActivationEvent:
    feature: FeatureRef
    token: int
    value: float


class ActivationTable:
    """Sparse per-feature activations over a token-aligned corpus.

    Only strictly positive activations need to be stored; zero events are
    accepted and kept but never selected.
    """

    def __init__(
        self,
        n_tokens: int,
        entries: Mapping[FeatureRef, tuple[np.ndarray, np.ndarray]],
        n_features: Mapping[int, int] | None = None,
    ):
        self.n_tokens = int(n_tokens)
        self._entries: dict[FeatureRef, tuple[np.ndarray, np.ndarray]] = {}
        for feat, (tokens, values) in entries.items():
            tokens = np.asarray(tokens, dtype=np.int64)
            values = np.asarray(values, dtype=np.float64)
            if tokens.shape != values.shape or tokens.ndim != 1:
                raise SemotError(f"feature {feat}: tokens/values shape mismatch")
            if tokens.size and (tokens.min() < 0 or tokens.max() >= self.n_tokens):
                raise SemotError(f"feature {feat}: token index out of range")
            if np.any(values < 0) or not np.all(np.isfinite(values)):
                raise NonPositiveValue(f"feature {feat}: activations must be finite and >= 0")
            order = np.argsort(tokens, kind="stable")
            tokens, values = tokens[order], values[order]
            if np.any(np.diff(tokens) == 0):
                raise SemotError(f"feature {feat}: duplicate token events")
            self._entries[feat] = (tokens, values)
        if n_features is None:
            n_features = {}
            for feat in self._entries:
                n_features[feat.layer] = max(n_features.get(feat.layer, 0), feat.index + 1)
        self.n_features = dict(n_features)
        for feat in self._entries:
            if feat.index >= self.n_features.get(feat.layer, 0):
                raise SemotError(f"feature {feat} exceeds declared feature count")

    @classmethod
    def from_events(
        cls,
        events: Iterable[ActivationEvent],
        n_tokens: int,
        n_features: Mapping[int, int] | None = None,
    ) -> "ActivationTable":
        grouped: dict[FeatureRef, tuple[list[int], list[float]]] = {}
        for ev in events:
            toks, vals = grouped.setdefault(ev.feature, ([], []))
            toks.append(ev.token)
            vals.append(ev.value)
        return cls(n_tokens, {f: (np.array(t), np.array(v)) for f, (t, v) in grouped.items()}, n_features)

    def events(self) -> list[ActivationEvent]:
        out = []
        for feat in sorted(self._entries):
            tokens, values = self._entries[feat]
            out.extend(ActivationEvent(feat, int(t), float(v)) for t, v in zip(tokens, values))
        return out

    def __contains__(self, feature) -> bool:
        return feature in self._entries

    def __getitem__(self, feature: FeatureRef) -> tuple[np.ndarray, np.ndarray]:
        try:
            return self._entries[feature]
        except KeyError:
            raise DeadFeature(f"feature {feature} has no recorded activations") from None

    def features(self, layer: int | None = None) -> list[FeatureRef]:
        feats = sorted(self._entries)
        if layer is not None:
            feats = [f for f in feats if f.layer == layer]
        return feats

    def dense(self, feature: FeatureRef) -> np.ndarray:
        out = np.zeros(self.n_tokens)
        tokens, values = self[feature]
        out[tokens] = values
        return out

    def min_positive(self, feature: FeatureRef) -> float | None:
        _, values = self[feature]
        pos = values[values > 0]
        return float(pos.min()) if pos.size else None

    def scaled(self, alpha: float, features: Iterable[FeatureRef] | None = None) -> "ActivationTable":
        """Copy with the activations of ``features`` (default: all) multiplied by ``alpha``."""
        chosen = set(self._entries) if features is None else set(features)
        entries = {
            f: (t, v * alpha if f in chosen else v) for f, (t, v) in self._entries.items()
        }
        return ActivationTable(self.n_tokens, entries, self.n_features)

    def __eq__(self, other):
        if not isinstance(other, ActivationTable):
            return NotImplemented
        if self.n_tokens != other.n_tokens or self.n_features != other.n_features:
            return False
        if set(self._entries) != set(other._entries):
            return False
        return all(
            np.array_equal(self._entries[f][0], other._entries[f][0])
            and np.array_equal(self._entries[f][1], other._entries[f][1])
            for f in self._entries
        )


@dataclass(frozen=True, eq=False)
class HiddenStateStore:
    """Token-aligned hidden states, one ``(T, d_layer)`` array per layer id."""

    layers: Mapping[int, np.ndarray]

    def __post_init__(self):
        if not self.layers:
            raise SemotError("store needs at least one layer")
        fixed = {}
        n_tokens = None
        for layer in sorted(self.layers):
            states = np.array(self.layers[layer], dtype=np.float64)
            if states.ndim != 2 or states.shape[1] < 1:
                raise SemotError(f"layer {layer}: states must be a (T, d) array with d >= 1")
            if not np.all(np.isfinite(states)):
                raise SemotError(f"layer {layer}: non-finite hidden state")
            if n_tokens is None:
                n_tokens = states.shape[0]
            elif states.shape[0] != n_tokens:
                raise SemotError(f"layer {layer}: {states.shape[0]} rows, expected {n_tokens}")
            states.setflags(write=False)
            fixed[int(layer)] = states
        object.__setattr__(self, "layers", fixed)

    @property
    def n_tokens(self) -> int:
        return next(iter(self.layers.values())).shape[0]

    @property
    def layer_ids(self) -> list[int]:
        return list(self.layers)

    def dim(self, layer: int) -> int:
        return self.states(layer).shape[1]

    def states(self, layer: int) -> np.ndarray:
        try:
            return self.layers[layer]
        except KeyError:
            raise LayerMismatch(f"layer {layer} not in store (have {self.layer_ids})") from None

    @cached_property
    def concatenated(self) -> np.ndarray:
        out = np.concatenate([self.layers[l] for l in self.layer_ids], axis=1)
        out.setflags(write=False)
        return out

    def __eq__(self, other):
        if not isinstance(other, HiddenStateStore):
            return NotImplemented
        return self.layer_ids == other.layer_ids and all(
            np.array_equal(self.layers[l], other.layers[l]) for l in self.layer_ids
        )


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Finite weighted point cloud. ``tokens`` records where the atoms came from."""

    support: np.ndarray
    weights: np.ndarray
    tokens: np.ndarray | None = field(default=None)

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.float64)
        if support.ndim == 1:
            support = support[:, None]
        weights = np.asarray(self.weights, dtype=np.float64)
        if support.ndim != 2 or weights.ndim != 1 or support.shape[0] != weights.shape[0]:
            raise SemotError("support and weights must have matching lengths")
        if weights.size == 0:
            raise EmptyInput("distribution needs at least one atom")
        if np.any(weights <= 0):
            raise NonPositiveValue("distribution weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise SemotError(f"weights sum to {weights.sum()!r}, not 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)
        if self.tokens is not None:
            object.__setattr__(self, "tokens", np.asarray(self.tokens, dtype=np.int64))

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.support.shape[1]

    @classmethod
    def uniform(cls, points) -> "EmpiricalDistribution":
        points = np.asarray(points, dtype=np.float64)
        n = points.shape[0]
        return cls(points, np.full(n, 1.0 / n))

    @classmethod
    def dirac(cls, point) -> "EmpiricalDistribution":
        return cls(np.atleast_2d(np.asarray(point, dtype=np.float64)), np.ones(1))


@dataclass(frozen=True)
class ProjectionSpec:
    mode: str = IDENTITY
    target_layer: int | None = None

    def __post_init__(self):
        if self.mode not in _MODES:
            raise SemotError(f"unknown projection mode {self.mode!r}")
        if self.mode == TARGET_LAYER and self.target_layer is None:
            raise SemotError("target-layer-alignment needs target_layer")

    @classmethod
    def identity(cls):
        return cls(IDENTITY)

    @classmethod
    def target(cls, layer: int):
        return cls(TARGET_LAYER, layer)

    @classmethod
    def concat(cls):
        return cls(CONCAT)


def topk_select(values, k: int, tokens=None) -> np.ndarray:
    """Token indices of the ``k`` largest strictly positive activations.

    ``values`` is either a dense per-token vector or, when ``tokens`` is given,
    the activations at those token positions. Ordering is by descending
    activation, ties broken by ascending token index. Fewer than ``k`` indices
    come back when fewer activations are positive.
    """
    values = np.asarray(values, dtype=np.float64)
    if tokens is None:
        tokens = np.arange(values.shape[0])
    else:
        tokens = np.asarray(tokens, dtype=np.int64)
    return tokens[_topk_positions(values, tokens, k)]


def _topk_positions(values: np.ndarray, tokens: np.ndarray, k: int) -> np.ndarray:
    if k < 1:
        raise SemotError("k must be positive")
    (pos,) = np.nonzero(values > 0)
    if pos.size == 0:
        raise DeadFeature("no strictly positive activation")
    # lexsort: last key is primary
    order = np.lexsort((tokens[pos], -values[pos]))
    return pos[order[:k]]


def normalize_weights(activations) -> np.ndarray:
    acts = np.asarray(activations, dtype=np.float64)
    if acts.size == 0:
        raise EmptyInput("no activations to normalise")
    if np.any(acts <= 0):
        raise NonPositiveValue("activations must be strictly positive")
    return acts / acts.sum()


def _reference_rows(store: HiddenStateStore, feature: FeatureRef, spec: ProjectionSpec) -> np.ndarray:
    if spec.mode == IDENTITY:
        return store.states(feature.layer)
    if spec.mode == TARGET_LAYER:
        store.states(feature.layer)
        return store.states(spec.target_layer)
    return store.concatenated


def build_distribution(
    store: HiddenStateStore,
    feature: FeatureRef,
    activations: ActivationTable,
    k: int = DEFAULT_K,
    spec: ProjectionSpec = ProjectionSpec(),
) -> EmpiricalDistribution:
    """Projected top-``k`` activation-weighted distribution of ``feature``."""
    if activations.n_tokens != store.n_tokens:
        raise LayerMismatch(
            f"activations cover {activations.n_tokens} tokens, store has {store.n_tokens}"
        )
    rows = _reference_rows(store, feature, spec)
    tokens, values = activations[feature]
    try:
        picked = _topk_positions(values, tokens, k)
    except DeadFeature:
        raise DeadFeature(f"feature {feature} never fires") from None
    selected = tokens[picked]
    return EmpiricalDistribution(rows[selected], normalize_weights(values[picked]), selected)


def centroid(dist: EmpiricalDistribution) -> np.ndarray:
    return dist.weights @ dist.support
