"""Synthetic corpora with planted feature structure.

Features are tied to *concepts*. A concept owns a block of tokens; every
feature of that concept fires on exactly those tokens, and the hidden states
of those tokens sit around per-layer concept anchors. Planted pairs share a
concept, so after token-aligned projection the partner's distribution lands on
the same points. Planted supernodes draw their members' anchors around a
common blob anchor.

Hidden states are snapped to a dyadic grid (multiples of 2**-12) so they are
exact in float32, which makes the binary state files lossless, and so that
mirrored points ``2c - x`` average back to ``c`` without rounding error.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .baselines import DecoderTable
from .core import ActivationTable, FeatureRef, HiddenStateStore
from .errors import InvalidSpec

UNIMODAL = "unimodal"
MULTIMODAL = "multimodal"
MIRROR = "mirror-bimodal"


@dataclass(frozen=True)
class SynthSpec:
    n_layers: int = 2
    dims: int | tuple[int, ...] = 16
    features_per_layer: int | tuple[int, ...] = 20
    tokens_per_feature: int = 40
    n_tokens: int | None = None  # None: just enough for the blocks plus background
    background_tokens: int = 40
    # None pairs layer 0 with layer 1 through a seeded permutation
    planted_pairs: tuple[tuple[FeatureRef, FeatureRef], ...] | None = None
    planted_supernodes: tuple[tuple[FeatureRef, ...], ...] = ()
    mode: str = UNIMODAL
    n_modes: int = 2
    noise_sigma: float = 0.1
    anchor_scale: float = 3.0
    layer_drift: float = 1.0
    spread: float = 0.3
    blob_jitter: float = 0.5
    act_log_sigma: float = 0.5
    decoder_noise: float = 0.3
    dead: tuple[FeatureRef, ...] = ()
    k: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.planted_pairs is not None:
            pairs = tuple((_ref(a), _ref(b)) for a, b in self.planted_pairs)
            object.__setattr__(self, "planted_pairs", pairs)
        object.__setattr__(
            self, "planted_supernodes", tuple(tuple(_ref(n) for n in g) for g in self.planted_supernodes)
        )
        object.__setattr__(self, "dead", tuple(_ref(n) for n in self.dead))

    def layer_dims(self) -> list[int]:
        return _per_layer(self.dims, self.n_layers, "dims")

    def layer_features(self) -> list[int]:
        return _per_layer(self.features_per_layer, self.n_layers, "features_per_layer")

    def to_json(self) -> dict:
        out = {}
        for k in self.__dataclass_fields__:
            v = getattr(self, k)
            if k == "planted_pairs" and v is not None:
                v = [[a.to_json(), b.to_json()] for a, b in v]
            elif k == "planted_supernodes":
                v = [[n.to_json() for n in g] for g in v]
            elif k == "dead":
                v = [n.to_json() for n in v]
            elif isinstance(v, tuple):
                v = list(v)
            out[k] = v
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "SynthSpec":
        obj = dict(obj)
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidSpec(f"unknown synth spec fields: {sorted(unknown)}")
        for k in ("dims", "features_per_layer"):
            if isinstance(obj.get(k), list):
                obj[k] = tuple(obj[k])
        if obj.get("planted_pairs") is not None:
            obj["planted_pairs"] = tuple(tuple(p) for p in obj["planted_pairs"])
        return cls(**obj)


GRID = 2.0**-12


def _snap(x):
    return np.round(np.asarray(x) / GRID) * GRID


def _ref(obj) -> FeatureRef:
    if isinstance(obj, FeatureRef):
        return obj
    if isinstance(obj, (tuple, list)):
        return FeatureRef(int(obj[0]), int(obj[1]))
    return FeatureRef.from_json(obj)


def _per_layer(value, n_layers, name) -> list[int]:
    if isinstance(value, int):
        return [value] * n_layers
    value = list(value)
    if len(value) != n_layers:
        raise InvalidSpec(f"{name} needs {n_layers} entries")
    return value


@dataclass(frozen=True, eq=False)
class GroundTruth:
    concept_of: dict[FeatureRef, int]
    pairs: dict[FeatureRef, FeatureRef]  # target -> planted source
    supernodes: tuple[tuple[FeatureRef, ...], ...]
    mirror_of: dict[int, int] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class SynthCorpus:
    spec: SynthSpec
    store: HiddenStateStore
    activations: ActivationTable
    truth: GroundTruth
    decoders: dict[int, DecoderTable]


class _Concepts:
    def __init__(self, feats):
        self.parent = {f: f for f in feats}

    def find(self, f):
        while self.parent[f] != f:
            self.parent[f] = self.parent[self.parent[f]]
            f = self.parent[f]
        return f

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            lo, hi = sorted((ra, rb))
            self.parent[hi] = lo


def _validate(spec: SynthSpec, feats: set[FeatureRef]):
    if spec.n_layers < 1 or min(spec.layer_dims()) < 1 or min(spec.layer_features()) < 1:
        raise InvalidSpec("need at least one layer, dimension and feature")
    if spec.mode not in (UNIMODAL, MULTIMODAL, MIRROR):
        raise InvalidSpec(f"unknown mode {spec.mode!r}")
    if spec.mode == MULTIMODAL and spec.n_modes < 2:
        raise InvalidSpec("multimodal needs n_modes >= 2")
    if spec.noise_sigma < 0 or spec.spread < 0 or spec.tokens_per_feature < 1:
        raise InvalidSpec("noise_sigma and spread must be >= 0, tokens_per_feature >= 1")
    if spec.mode == MIRROR and spec.tokens_per_feature % 2:
        raise InvalidSpec("mirror-bimodal needs an even tokens_per_feature")
    refs = [f for p in (spec.planted_pairs or ()) for f in p]
    refs += [f for g in spec.planted_supernodes for f in g] + list(spec.dead)
    for f in refs:
        if f not in feats:
            raise InvalidSpec(f"planted structure references unknown feature {f}")
    seen = set()
    for g in spec.planted_supernodes:
        for f in g:
            if f in seen:
                raise InvalidSpec(f"feature {f} in two planted supernodes")
            seen.add(f)


def generate(spec: SynthSpec = SynthSpec()) -> SynthCorpus:
    rng = np.random.default_rng(spec.seed)
    dims = spec.layer_dims()
    n_feat = spec.layer_features()
    feats = [FeatureRef(l, i) for l in range(spec.n_layers) for i in range(n_feat[l])]
    _validate(spec, set(feats))

    pairs = spec.planted_pairs
    if pairs is None:
        pairs = ()
        if spec.n_layers >= 2:
            perm = rng.permutation(n_feat[1])
            pairs = tuple(
                (FeatureRef(0, i), FeatureRef(1, int(perm[i]))) for i in range(min(n_feat[0], n_feat[1]))
            )

    uf = _Concepts(feats)
    for a, b in pairs:
        uf.union(a, b)
    roots = sorted({uf.find(f) for f in feats})
    concept_id = {r: c for c, r in enumerate(roots)}
    concept_of = {f: concept_id[uf.find(f)] for f in feats}
    n_concepts = len(roots)

    block = spec.tokens_per_feature
    needed = n_concepts * block + spec.background_tokens
    n_tokens = needed if spec.n_tokens is None else spec.n_tokens
    if n_tokens < n_concepts * block:
        raise InvalidSpec(f"n_tokens={n_tokens} too small for {n_concepts} blocks of {block}")

    # concept -> planted blob
    blob_of = {}
    for g, group in enumerate(spec.planted_supernodes):
        for f in group:
            blob_of.setdefault(concept_of[f], g)

    mirror_of = {}
    if spec.mode == MIRROR:
        for c in range(0, n_concepts - 1, 2):
            mirror_of[c], mirror_of[c + 1] = c + 1, c

    # per-layer concept centres: random walk across layers where dims agree
    centres = []
    blob_centres = []
    for l, d in enumerate(dims):
        if l > 0 and dims[l - 1] == d:
            centres.append(centres[-1] + spec.layer_drift * rng.standard_normal((n_concepts, d)))
            blob_centres.append(
                blob_centres[-1] + spec.layer_drift * rng.standard_normal(blob_centres[-1].shape)
            )
        else:
            centres.append(spec.anchor_scale * rng.standard_normal((n_concepts, d)))
            blob_centres.append(spec.anchor_scale * rng.standard_normal((len(spec.planted_supernodes), d)))
    for l in range(spec.n_layers):
        for c, g in blob_of.items():
            centres[l][c] = blob_centres[l][g] + spec.blob_jitter * rng.standard_normal(dims[l])
        for c, partner in mirror_of.items():
            if partner < c:
                centres[l][c] = centres[l][partner]
        centres[l] = _snap(centres[l])

    states = [spec.anchor_scale * rng.standard_normal((n_tokens, d)) for d in dims]
    modes_per_concept = {UNIMODAL: 1, MULTIMODAL: spec.n_modes, MIRROR: 2}[spec.mode]
    for c in range(n_concepts):
        toks = np.arange(c * block, (c + 1) * block)
        for l, d in enumerate(dims):
            offsets = np.zeros((modes_per_concept, d))
            if modes_per_concept > 1:
                offsets = 0.5 * spec.anchor_scale * rng.standard_normal((modes_per_concept, d))
            if spec.mode == MIRROR:
                offsets[1] = -offsets[0]
                first = toks[0::2]
                x = _snap(centres[l][c] + offsets[0] + spec.spread * rng.standard_normal((first.size, d)))
                states[l][first] = x
                states[l][first + 1] = 2.0 * centres[l][c] - x
            else:
                mode = np.arange(block) % modes_per_concept
                states[l][toks] = (
                    centres[l][c] + offsets[mode] + spec.spread * rng.standard_normal((block, d))
                )
    states = [_snap(s) for s in states]

    # activations
    base = {}
    for c in range(n_concepts):
        if spec.mode == MIRROR:
            half = rng.lognormal(0.0, spec.act_log_sigma, block // 2)
            base[c] = np.repeat(half, 2)
        else:
            base[c] = rng.lognormal(0.0, spec.act_log_sigma, block)
    dead = set(spec.dead)
    entries = {}
    for f in feats:
        c = concept_of[f]
        scale = rng.lognormal(0.0, 1.0)
        if spec.mode == MIRROR:
            noise = np.repeat(rng.standard_normal(block // 2), 2)
        else:
            noise = rng.standard_normal(block)
        if f in dead:
            continue
        acts = scale * base[c] * np.exp(spec.noise_sigma * noise)
        entries[f] = (np.arange(c * block, (c + 1) * block), acts)
    activations = ActivationTable(n_tokens, entries, {l: n_feat[l] for l in range(spec.n_layers)})

    decoders = {}
    for l in range(spec.n_layers):
        rows = np.empty((n_feat[l], dims[l]))
        for i in range(n_feat[l]):
            direction = centres[l][concept_of[FeatureRef(l, i)]]
            direction = direction / (np.linalg.norm(direction) + 1e-12)
            rows[i] = direction + spec.decoder_noise * rng.standard_normal(dims[l]) / np.sqrt(dims[l])
        decoders[l] = DecoderTable(l, rows.astype(np.float32).astype(np.float64)).with_thresholds(activations)

    truth = GroundTruth(
        concept_of=concept_of,
        pairs={a: b for a, b in pairs},
        supernodes=spec.planted_supernodes,
        mirror_of=mirror_of,
    )
    store = HiddenStateStore({l: states[l] for l in range(spec.n_layers)})
    return SynthCorpus(spec, store, activations, truth, decoders)


def two_blob_spec(n_nodes: int = 50, seed: int = 0, **overrides) -> SynthSpec:
    """Circuit-compression fixture: ``n_nodes`` features over two layers in two blobs."""
    per_layer = (n_nodes + 1) // 2
    rng = np.random.default_rng([seed, 7])
    nodes = [FeatureRef(l, i) for l in range(2) for i in range(per_layer)][:n_nodes]
    order = rng.permutation(len(nodes))
    half = len(nodes) // 2
    blobs = (
        tuple(sorted(nodes[i] for i in order[:half])),
        tuple(sorted(nodes[i] for i in order[half:])),
    )
    params = dict(
        n_layers=2,
        dims=4,
        features_per_layer=per_layer,
        tokens_per_feature=12,
        background_tokens=0,
        planted_pairs=(),
        planted_supernodes=blobs,
        anchor_scale=4.0,
        blob_jitter=0.6,
        spread=0.3,
        k=6,
        seed=seed,
    )
    params.update(overrides)
    return SynthSpec(**params)


def circuit_nodes(spec: SynthSpec) -> list[FeatureRef]:
    """Nodes of the planted supernodes, in sorted order."""
    return sorted(n for g in spec.planted_supernodes for n in g)


def planted_accuracy(predicted: dict[FeatureRef, FeatureRef], truth: GroundTruth, targets: Sequence[FeatureRef] | None = None) -> float:
    targets = list(truth.pairs) if targets is None else list(targets)
    hits = sum(predicted.get(t) == truth.pairs[t] for t in targets)
    return hits / len(targets)
