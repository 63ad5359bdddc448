import numpy as np
import pytest

from semot import FeatureRef, ProjectionSpec, build_distribution, centroid
from semot.baselines import naive_centroid_distance
from semot.errors import InvalidSpec
from semot.synth import GRID, MIRROR, MULTIMODAL, SynthSpec, circuit_nodes, generate, two_blob_spec
from semot.transport import GroundCost, Solver, wasserstein

F = FeatureRef


def test_deterministic():
    a, b = generate(SynthSpec(seed=5)), generate(SynthSpec(seed=5))
    assert a.store == b.store and a.activations == b.activations and a.truth.pairs == b.truth.pairs
    assert generate(SynthSpec(seed=6)).store != a.store


def test_default_shape():
    c = generate()
    assert c.store.layer_ids == [0, 1] and c.store.dim(0) == 16
    assert len(c.activations.features(0)) == 20 and len(c.truth.pairs) == 20
    assert sorted(c.truth.pairs.values()) == c.activations.features(1)


def test_states_exact_in_float32():
    c = generate(SynthSpec(features_per_layer=5))
    for l in c.store.layer_ids:
        s = c.store.states(l)
        assert np.array_equal(s.astype(np.float32).astype(np.float64), s)
        assert np.array_equal(np.round(s / GRID) * GRID, s)


def test_planted_pairs_share_tokens():
    c = generate(SynthSpec(features_per_layer=6))
    for t, s in c.truth.pairs.items():
        assert np.array_equal(c.activations[t][0], c.activations[s][0])


def test_noise_free_pair_has_zero_distance():
    c = generate(SynthSpec(features_per_layer=4, noise_sigma=0.0))
    spec = ProjectionSpec.target(0)
    for t, s in c.truth.pairs.items():
        mu = build_distribution(c.store, t, c.activations, 16, spec)
        nu = build_distribution(c.store, s, c.activations, 16, spec)
        assert wasserstein(GroundCost.euclidean(), mu, nu, Solver.exact()) == pytest.approx(0.0, abs=1e-12)


def test_mirror_pairs_equal_centroid_positive_distance():
    c = generate(SynthSpec(mode=MIRROR, features_per_layer=8))
    assert c.truth.mirror_of
    spec = ProjectionSpec.target(0)
    by_concept = {}
    for f, k in c.truth.concept_of.items():
        if f.layer == 1:
            by_concept[k] = f
    for k, k2 in c.truth.mirror_of.items():
        a, b = by_concept[k], by_concept[k2]
        mu = build_distribution(c.store, a, c.activations, 16, spec)
        nu = build_distribution(c.store, b, c.activations, 16, spec)
        assert naive_centroid_distance(mu, nu) < 1e-9
        assert wasserstein(GroundCost.euclidean(), mu, nu, Solver.exact()) > 0.1


def test_multimodal_has_clusters():
    c = generate(SynthSpec(mode=MULTIMODAL, n_modes=3, features_per_layer=3, tokens_per_feature=30, spread=0.05))
    f = F(0, 0)
    d = build_distribution(c.store, f, c.activations, 30, ProjectionSpec.identity())
    dev = np.linalg.norm(d.support - centroid(d), axis=1)
    assert dev.min() > 1.0


def test_dead_features():
    c = generate(SynthSpec(features_per_layer=4, dead=((0, 2),), planted_pairs=()))
    assert F(0, 2) not in c.activations


def test_two_blob():
    spec = two_blob_spec(50, seed=3)
    assert len(circuit_nodes(spec)) == 50
    assert sorted(map(len, spec.planted_supernodes)) == [25, 25]
    generate(spec)


def test_invalid_specs():
    with pytest.raises(InvalidSpec):
        generate(SynthSpec(noise_sigma=-1))
    with pytest.raises(InvalidSpec):
        generate(SynthSpec(mode="bogus"))
    with pytest.raises(InvalidSpec):
        generate(SynthSpec(mode=MULTIMODAL, n_modes=1))
    with pytest.raises(InvalidSpec):
        generate(SynthSpec(planted_pairs=(((0, 99), (1, 0)),)))


def test_spec_json_round_trip():
    s = SynthSpec(dims=(3, 4), planted_pairs=(((0, 1), (1, 0)),), planted_supernodes=(((0, 0), (0, 1)),), mode=MIRROR)
    assert SynthSpec.from_json(s.to_json()) == s
    with pytest.raises(InvalidSpec):
        SynthSpec.from_json({"nope": 1})
