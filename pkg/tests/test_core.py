import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from semot import (
    ActivationEvent,
    ActivationTable,
    EmpiricalDistribution,
    FeatureRef,
    HiddenStateStore,
    ProjectionSpec,
    build_distribution,
    centroid,
    normalize_weights,
    topk_select,
)
from semot.errors import DeadFeature, EmptyInput, LayerMismatch, NonPositiveValue, SemotError


class TestTopK:
    def test_both_maxima(self):
        assert set(topk_select([0.5, 0.9, 0.1, 0.9], 2)) == {1, 3}

    def test_tie_goes_to_lower_token(self):
        assert list(topk_select([0.5, 0.9, 0.1, 0.9], 1)) == [1]

    def test_fewer_positives_than_k(self):
        assert list(topk_select([0.2, 0.0, 0.0], 5)) == [0]

    def test_order_is_descending_then_token(self):
        assert list(topk_select([0.3, 0.9, 0.3, 0.9, 0.5], 5)) == [1, 3, 4, 0, 2]

    def test_sparse_tokens(self):
        assert list(topk_select([1.0, 2.0, 2.0], 2, tokens=[9, 7, 3])) == [3, 7]

    def test_dead(self):
        with pytest.raises(DeadFeature):
            topk_select([0.0, 0.0], 3)

    def test_bad_k(self):
        with pytest.raises(SemotError):
            topk_select([1.0], 0)

    @given(st.lists(st.integers(0, 4), min_size=1, max_size=30).filter(lambda v: any(v)), st.integers(1, 40))
    def test_matches_sorted_reference(self, values, k):
        ref = sorted((-v, t) for t, v in enumerate(values) if v > 0)[:k]
        assert list(topk_select(values, k)) == [t for _, t in ref]

    @given(
        st.lists(st.one_of(st.just(0.0), st.floats(1e-6, 100.0)), min_size=1, max_size=30).filter(any),
        st.integers(1, 40),
        st.sampled_from([1e-3, 0.37, 1.0, 42.0, 1e3]),
    )
    def test_scale_invariant(self, values, k, alpha):
        v = np.array(values)
        assert np.array_equal(topk_select(v, k), topk_select(alpha * v, k))


class TestNormalize:
    def test_ratio(self):
        assert np.allclose(normalize_weights([2, 3, 5]), [0.2, 0.3, 0.5], atol=1e-15)

    def test_singleton(self):
        assert list(normalize_weights([7])) == [1.0]

    def test_scaled(self):
        assert np.allclose(normalize_weights(np.array([2, 3, 5]) * 1000), [0.2, 0.3, 0.5], atol=1e-15)

    def test_errors(self):
        with pytest.raises(EmptyInput):
            normalize_weights([])
        with pytest.raises(NonPositiveValue):
            normalize_weights([1.0, 0.0])

    @given(st.lists(st.floats(1e-6, 1e6), min_size=1, max_size=40))
    def test_simplex(self, acts):
        w = normalize_weights(acts)
        assert abs(w.sum() - 1) <= 1e-12 and np.all(w > 0)


def _table(n_tokens, entries):
    return ActivationTable(n_tokens, {FeatureRef(*f): (np.array(t), np.array(v, dtype=float)) for f, (t, v) in entries.items()})


class TestBuildDistribution:
    def test_single_token_identity(self):
        store = HiddenStateStore({0: [[1.0, 2.0]]})
        d = build_distribution(store, FeatureRef(0, 0), _table(1, {(0, 0): ([0], [3.0])}), 4, ProjectionSpec.identity())
        assert d.support.tolist() == [[1.0, 2.0]] and d.weights.tolist() == [1.0]

    def test_target_alignment_uses_target_rows(self, rng):
        store = HiddenStateStore({0: rng.standard_normal((10, 3)), 1: rng.standard_normal((10, 2))})
        acts = _table(10, {(1, 0): ([4, 7], [1.0, 2.0])})
        d = build_distribution(store, FeatureRef(1, 0), acts, 5, ProjectionSpec.target(0))
        assert list(d.tokens) == [7, 4]
        assert np.array_equal(d.support, store.states(0)[[7, 4]])

    def test_concat_dimension(self, rng):
        store = HiddenStateStore({0: rng.standard_normal((5, 2)), 1: rng.standard_normal((5, 3))})
        d = build_distribution(store, FeatureRef(0, 0), _table(5, {(0, 0): ([1, 2], [1.0, 1.0])}), 4, ProjectionSpec.concat())
        assert d.dim == 5
        assert np.array_equal(d.support[0], np.concatenate([store.states(0)[1], store.states(1)[1]]))

    def test_missing_layer(self, rng):
        store = HiddenStateStore({0: rng.standard_normal((5, 2))})
        acts = _table(5, {(0, 0): ([1], [1.0])})
        with pytest.raises(LayerMismatch):
            build_distribution(store, FeatureRef(0, 0), acts, 4, ProjectionSpec.target(3))

    def test_dead(self, rng):
        store = HiddenStateStore({0: rng.standard_normal((5, 2))})
        acts = _table(5, {(0, 0): ([1], [0.0])})
        with pytest.raises(DeadFeature):
            build_distribution(store, FeatureRef(0, 0), acts, 4)
        with pytest.raises(DeadFeature):
            build_distribution(store, FeatureRef(0, 1), acts, 4)

    @given(st.integers(0, 10_000), st.sampled_from([1e-3, 0.37, 1.0, 42.0, 1e3]))
    def test_rescaling_invariance(self, seed, alpha):
        r = np.random.default_rng(seed)
        store = HiddenStateStore({0: r.standard_normal((20, 3)), 1: r.standard_normal((20, 2))})
        toks = np.nonzero(r.random(20) < 0.6)[0]
        if toks.size == 0:
            toks = np.array([0])
        acts = ActivationTable(20, {FeatureRef(1, 0): (toks, r.integers(1, 4, toks.size) / 4.0)})
        f = FeatureRef(1, 0)
        a = build_distribution(store, f, acts, 6, ProjectionSpec.target(0))
        b = build_distribution(store, f, acts.scaled(alpha), 6, ProjectionSpec.target(0))
        assert np.array_equal(a.tokens, b.tokens)
        assert np.max(np.abs(a.weights - b.weights)) <= 1e-12
        assert np.array_equal(a.support, b.support)


class TestDistribution:
    def test_centroid_examples(self):
        assert centroid(EmpiricalDistribution([[0, 0], [2, 0]], [0.5, 0.5])).tolist() == [1.0, 0.0]
        assert centroid(EmpiricalDistribution.dirac([3, 4])).tolist() == [3.0, 4.0]
        assert np.allclose(centroid(EmpiricalDistribution([[0], [10]], [0.9, 0.1])), [1.0])

    def test_invalid_weights(self):
        with pytest.raises(SemotError):
            EmpiricalDistribution([[0.0], [1.0]], [0.5, 0.6])
        with pytest.raises(SemotError):
            EmpiricalDistribution([[0.0], [1.0]], [1.0, 0.0])
        with pytest.raises(SemotError):
            EmpiricalDistribution([[0.0]], [0.5, 0.5])


class TestTypes:
    def test_feature_ref(self):
        f = FeatureRef.parse("3:17")
        assert (f.layer, f.index, str(f)) == (3, 17, "3:17")
        assert FeatureRef.from_json(f.to_json()) == f
        with pytest.raises(SemotError):
            FeatureRef(-1, 0)

    def test_store_validation(self):
        with pytest.raises(SemotError):
            HiddenStateStore({0: np.zeros((3, 2)), 1: np.zeros((4, 2))})
        with pytest.raises(SemotError):
            HiddenStateStore({0: np.array([[np.nan]])})

    def test_store_is_read_only(self):
        s = HiddenStateStore({0: np.zeros((3, 2))})
        with pytest.raises(ValueError):
            s.states(0)[0, 0] = 1.0

    def test_table_from_events(self):
        evs = [ActivationEvent(FeatureRef(0, 1), 3, 2.0), ActivationEvent(FeatureRef(0, 1), 1, 1.0)]
        t = ActivationTable.from_events(evs, 5)
        assert t[FeatureRef(0, 1)][0].tolist() == [1, 3]
        assert t.events() == sorted(evs, key=lambda e: e.token)
        assert t.min_positive(FeatureRef(0, 1)) == 1.0

    def test_table_rejects_bad_events(self):
        with pytest.raises(NonPositiveValue):
            _table(3, {(0, 0): ([0], [-1.0])})
        with pytest.raises(SemotError):
            _table(3, {(0, 0): ([5], [1.0])})
        with pytest.raises(SemotError):
            _table(3, {(0, 0): ([1, 1], [1.0, 2.0])})
