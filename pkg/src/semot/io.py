"""On-disk formats.

Hidden states: one binary file per layer, ``b"SEMOT1\\0"`` magic, then
little-endian ``u32`` layer id, ``u64`` token count, ``u32`` dim, followed by
row-major little-endian ``f32`` values. Decoder tables reuse the layout with
the count field holding the number of features.

Activations: newline-delimited JSON, one ``{"layer", "feature", "token", "act"}``
record per event.

Manifest, node lists, partitions and matches: JSON carrying ``"version"``.
"""
from __future__ import annotations

import csv
import json
import os
import struct
from typing import Iterable, Sequence

import numpy as np

from .baselines import DecoderTable, RectDistances
from .compression import DistanceMatrix, SupernodePartition
from .core import ActivationEvent, ActivationTable, FeatureRef, HiddenStateStore
from .errors import (
    BadMagic,
    DimMismatch,
    FormatError,
    NonFiniteValue,
    SemotError,
    TokenCountMismatch,
)
from .matching import MatchResult

VERSION = "semot-1"
MAGIC = b"SEMOT1\0"
_HEADER = struct.Struct("<IQI")
HEADER_SIZE = len(MAGIC) + _HEADER.size
MANIFEST_NAME = "manifest.json"


# ---------------------------------------------------------------------------
# binary state files


def write_matrix(path, layer: int, rows: np.ndarray):
    rows = np.asarray(rows)
    if rows.ndim != 2:
        raise SemotError("expected a 2-d array")
    data = rows.astype("<f4")
    if not np.array_equal(data.astype(np.float64), rows.astype(np.float64)):
        raise FormatError(f"layer {layer}: values are not exactly representable as float32")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(int(layer), rows.shape[0], rows.shape[1]))
        fh.write(np.ascontiguousarray(data).tobytes())


def read_matrix(path) -> tuple[int, np.ndarray]:
    """``(layer, rows)`` from a binary state or decoder file."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < HEADER_SIZE or blob[: len(MAGIC)] != MAGIC:
        raise BadMagic(f"{path}: not a SEMOT1 file or truncated header")
    layer, count, dim = _HEADER.unpack_from(blob, len(MAGIC))
    body = blob[HEADER_SIZE:]
    expected = count * dim * 4
    if len(body) != expected:
        raise BadMagic(f"{path}: expected {expected} data bytes, found {len(body)}")
    rows = np.frombuffer(body, dtype="<f4").reshape(count, dim).astype(np.float64)
    if not np.all(np.isfinite(rows)):
        raise NonFiniteValue(f"{path}: NaN or Inf in data")
    return layer, rows


def read_header(path) -> tuple[int, int, int]:
    with open(path, "rb") as fh:
        head = fh.read(HEADER_SIZE)
    if len(head) < HEADER_SIZE or head[: len(MAGIC)] != MAGIC:
        raise BadMagic(f"{path}: not a SEMOT1 file or truncated header")
    return _HEADER.unpack_from(head, len(MAGIC))


# ---------------------------------------------------------------------------
# activation events


def write_events(path, table: ActivationTable):
    with open(path, "w") as fh:
        for ev in table.events():
            rec = {"layer": ev.feature.layer, "feature": ev.feature.index, "token": ev.token, "act": ev.value}
            fh.write(json.dumps(rec) + "\n")


def read_events(path) -> list[ActivationEvent]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                ev = ActivationEvent(FeatureRef(int(rec["layer"]), int(rec["feature"])), int(rec["token"]), float(rec["act"]))
            except (ValueError, KeyError, TypeError) as err:
                raise FormatError(f"{path}:{lineno}: bad event record ({err})") from None
            if not np.isfinite(ev.value):
                raise NonFiniteValue(f"{path}:{lineno}: non-finite activation")
            out.append(ev)
    return out


# ---------------------------------------------------------------------------
# manifest


def _resolve(base, path):
    return path if os.path.isabs(path) else os.path.join(base, path)


def read_manifest(path) -> dict:
    try:
        with open(path) as fh:
            man = json.load(fh)
    except json.JSONDecodeError as err:
        raise FormatError(f"{path}: invalid JSON ({err})") from None
    if man.get("version") != VERSION:
        raise FormatError(f"{path}: unsupported manifest version {man.get('version')!r}")
    if not man.get("layers"):
        raise FormatError(f"{path}: manifest lists no layers")
    for entry in man["layers"]:
        for key in ("layer", "dim", "tokens", "path"):
            if key not in entry:
                raise FormatError(f"{path}: layer entry missing {key!r}")
    return man


def load_store(manifest_path) -> HiddenStateStore:
    """Validated hidden states for every layer listed in the manifest."""
    man = read_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    layers = {}
    tokens = {int(e["tokens"]) for e in man["layers"]}
    if len(tokens) != 1:
        raise TokenCountMismatch(f"manifest token counts differ across layers: {sorted(tokens)}")
    for entry in man["layers"]:
        path = _resolve(base, entry["path"])
        layer, rows = read_matrix(path)
        if layer != int(entry["layer"]):
            raise FormatError(f"{path}: header layer {layer}, manifest says {entry['layer']}")
        if rows.shape[1] != int(entry["dim"]):
            raise DimMismatch(f"{path}: header dim {rows.shape[1]}, manifest says {entry['dim']}")
        if rows.shape[0] != int(entry["tokens"]):
            raise TokenCountMismatch(f"{path}: header has {rows.shape[0]} tokens, manifest says {entry['tokens']}")
        if layer in layers:
            raise FormatError(f"layer {layer} listed twice")
        layers[layer] = rows
    return HiddenStateStore(layers)


def load_activations(manifest_path, n_tokens: int | None = None) -> ActivationTable:
    man = read_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    if "events" not in man:
        raise FormatError(f"{manifest_path}: no activation events listed")
    if n_tokens is None:
        n_tokens = int(man["layers"][0]["tokens"])
    n_features = {int(e["layer"]): int(e["features"]) for e in man["layers"] if "features" in e}
    return ActivationTable.from_events(read_events(_resolve(base, man["events"])), n_tokens, n_features or None)


def load_decoders(manifest_path) -> dict[int, DecoderTable]:
    man = read_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    out = {}
    for entry in man.get("decoders", []):
        path = _resolve(base, entry["path"])
        layer, rows = read_matrix(path)
        if layer != int(entry["layer"]):
            raise FormatError(f"{path}: header layer {layer}, manifest says {entry['layer']}")
        out[layer] = DecoderTable(layer, rows)
    return out


def load_corpus(manifest_path) -> tuple[HiddenStateStore, ActivationTable]:
    store = load_store(manifest_path)
    return store, load_activations(manifest_path, store.n_tokens)


def write_corpus(
    out_dir,
    store: HiddenStateStore,
    activations: ActivationTable,
    decoders: dict[int, DecoderTable] | None = None,
    extra: dict | None = None,
) -> str:
    """Write states, events, optional decoders and the manifest; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    layers = []
    for layer in store.layer_ids:
        name = f"layer{layer}.bin"
        write_matrix(os.path.join(out_dir, name), layer, store.states(layer))
        entry = {"layer": layer, "dim": store.dim(layer), "tokens": store.n_tokens, "path": name}
        if layer in activations.n_features:
            entry["features"] = activations.n_features[layer]
        layers.append(entry)
    write_events(os.path.join(out_dir, "events.ndjson"), activations)
    man = {"version": VERSION, "layers": layers, "events": "events.ndjson"}
    if decoders:
        man["decoders"] = []
        for layer in sorted(decoders):
            name = f"decoder{layer}.bin"
            write_matrix(os.path.join(out_dir, name), layer, decoders[layer].vectors)
            man["decoders"].append({"layer": layer, "path": name})
    if extra:
        man.update(extra)
    path = os.path.join(out_dir, MANIFEST_NAME)
    _dump(path, man)
    return path


# ---------------------------------------------------------------------------
# JSON documents


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _load_versioned(path, key) -> dict:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as err:
        raise FormatError(f"{path}: invalid JSON ({err})") from None
    if not isinstance(obj, dict) or obj.get("version") != VERSION or key not in obj:
        raise FormatError(f"{path}: expected a {VERSION} document with {key!r}")
    return obj


def write_nodes(path, nodes: Sequence[FeatureRef]):
    _dump(path, {"version": VERSION, "nodes": [str(n) for n in nodes]})


def read_nodes(path) -> list[FeatureRef]:
    obj = _load_versioned(path, "nodes")
    try:
        return [FeatureRef.from_json(n) for n in obj["nodes"]]
    except (ValueError, KeyError, TypeError) as err:
        raise FormatError(f"{path}: bad node entry ({err})") from None


def write_partition(path, partition: SupernodePartition):
    _dump(path, {"version": VERSION, **partition.to_json()})


def read_partition(path) -> SupernodePartition:
    return SupernodePartition.from_json(_load_versioned(path, "groups"))


def write_matches(path, results: Iterable[MatchResult]):
    _dump(path, {"version": VERSION, "matches": [r.to_json() for r in results]})


def read_matches(path) -> list[MatchResult]:
    return [MatchResult.from_json(r) for r in _load_versioned(path, "matches")["matches"]]


def write_groups(path, groups: Sequence[Sequence[FeatureRef]]):
    _dump(path, {"version": VERSION, "groups": [[str(n) for n in g] for g in groups]})


def read_groups(path) -> list[list[FeatureRef]]:
    return [[FeatureRef.from_json(n) for n in g] for g in _load_versioned(path, "groups")["groups"]]


# ---------------------------------------------------------------------------
# CSV matrices


def write_distance_csv(path, d: DistanceMatrix):
    write_rect_csv(path, RectDistances(d.ids, d.ids, d.entries))


def read_distance_csv(path) -> DistanceMatrix:
    r = read_rect_csv(path)
    if r.rows != r.cols:
        raise FormatError(f"{path}: row and column ids differ")
    return DistanceMatrix(r.rows, r.entries)


def write_rect_csv(path, r: RectDistances):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + [str(c) for c in r.cols])
        for node, row in zip(r.rows, r.entries):
            w.writerow([str(node)] + [repr(float(v)) for v in row])


def read_rect_csv(path) -> RectDistances:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty CSV")
    try:
        cols = [FeatureRef.parse(c) for c in rows[0][1:]]
        ids = [FeatureRef.parse(r[0]) for r in rows[1:]]
        entries = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=np.float64)
    except (ValueError, IndexError) as err:
        raise FormatError(f"{path}: malformed distance CSV ({err})") from None
    return RectDistances(ids, cols, entries.reshape(len(ids), len(cols)))
