import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from semot import ActivationTable, EmpiricalDistribution, FeatureRef, HiddenStateStore, ProjectionSpec
from semot.compression import (
    CompressionConfig,
    DistanceMatrix,
    SupernodePartition,
    agglomerate,
    agglomerate_labels,
    assignment_from_scores,
    cooccurrence_counts,
    distance_matrix,
    jaccard_affinity,
    modular_groups,
    node_distributions,
    pairwise_distances,
    supernode_centers,
    supernode_objective,
    voronoi_assign,
)
from semot.errors import DisconnectedAndOverclustered, InvalidClusterCount, SemotError, UnknownNode
from semot.synth import circuit_nodes, generate, two_blob_spec
from semot.transport import GroundCost, Solver, cost_matrix, exact_ot

from oracles import scipy_average_clusters

F = FeatureRef


def _ids(n):
    return [F(0, i) for i in range(n)]


def _line_matrix(xs):
    x = np.asarray(xs, dtype=float)
    return DistanceMatrix(_ids(len(x)), np.abs(x[:, None] - x[None, :]))


def _dirac_corpus(points):
    store = HiddenStateStore({0: np.array(points, dtype=float).reshape(len(points), -1)})
    acts = ActivationTable(len(points), {F(0, i): (np.array([i]), np.array([1.0])) for i in range(len(points))})
    return store, acts


class TestDistanceMatrix:
    def test_three_diracs(self):
        store, acts = _dirac_corpus([0.0, 1.0, 3.0])
        d = pairwise_distances(_ids(3), store, acts, CompressionConfig(k=1, solver=Solver.exact()))
        assert np.allclose(d.entries, [[0, 1, 3], [1, 0, 2], [3, 2, 0]], atol=1e-12)

    def test_identical_distributions(self):
        store = HiddenStateStore({0: np.array([[0.0], [2.0], [0.0], [2.0]])})
        acts = ActivationTable(4, {F(0, 0): ([0, 1], [1.0, 1.0]), F(0, 1): ([2, 3], [5.0, 5.0])})
        d = pairwise_distances(_ids(2), store, acts, CompressionConfig(k=2, solver=Solver.exact()))
        assert d.entries[0, 1] == pytest.approx(0.0, abs=1e-12)

    def test_dead_nodes_dropped(self):
        store, acts = _dirac_corpus([0.0, 1.0, 3.0])
        d = pairwise_distances(_ids(3) + [F(0, 7)], store, acts, CompressionConfig(k=1))
        assert d.dropped == (F(0, 7),) and d.size == 3

    def test_validation(self):
        with pytest.raises(SemotError):
            DistanceMatrix(_ids(2), [[0, 1], [2, 0]])
        with pytest.raises(SemotError):
            DistanceMatrix(_ids(2), [[1, 1], [1, 0]])
        with pytest.raises(SemotError):
            DistanceMatrix(_ids(2), [[0, -1], [-1, 0]])

    def test_sinkhorn_matches_exact_on_circuit(self):
        spec = two_blob_spec(50, seed=1)
        c = generate(spec)
        nodes = circuit_nodes(spec)
        d = pairwise_distances(nodes, c.store, c.activations, CompressionConfig(k=spec.k, solver=Solver(eps=(0.1, 0.01, 0.001))))
        dists, _ = node_distributions(nodes, c.store, c.activations, spec.k, ProjectionSpec.concat())
        euc = GroundCost.euclidean()
        for i, j in [(0, 1), (3, 40), (10, 11), (20, 49), (5, 25)]:
            mu, nu = dists[nodes[i]], dists[nodes[j]]
            ref = exact_ot(cost_matrix(euc, mu, nu), mu.weights, nu.weights).cost
            assert abs(d.entries[i, j] - ref) <= 1e-3 * max(ref, 1.0)

    def test_threads_independent(self):
        spec = two_blob_spec(16, seed=2)
        c = generate(spec)
        dists, _ = node_distributions(circuit_nodes(spec), c.store, c.activations, spec.k)
        a = distance_matrix(dists, threads=1)
        b = distance_matrix(dists, threads=3)
        assert np.array_equal(a.entries, b.entries)


class TestAgglomerate:
    def test_blobs(self):
        p = agglomerate(_line_matrix([0, 0.1, 10, 10.1]), 2)
        assert p.groups == ((F(0, 0), F(0, 1)), (F(0, 2), F(0, 3)))
        assert p.objective == pytest.approx(0.2)

    def test_extremes(self):
        d = _line_matrix([0, 1, 5, 6, 20])
        singles = agglomerate(d, 5)
        assert all(len(g) == 1 for g in singles.groups) and singles.objective == 0
        assert agglomerate(d, 1).groups == (tuple(_ids(5)),)
        with pytest.raises(InvalidClusterCount):
            agglomerate(d, 0)
        with pytest.raises(InvalidClusterCount):
            agglomerate(d, 6)

    def test_tie_break(self):
        # all pairwise distances equal: (0, 1) merges first, then 2 joins
        d = DistanceMatrix(_ids(4), np.ones((4, 4)) - np.eye(4))
        assert agglomerate_labels(d.entries, 3) == [[0, 1], [2], [3]]
        assert agglomerate_labels(d.entries, 2) == [[0, 1, 2], [3]]

    @given(st.integers(0, 10_000), st.integers(2, 14))
    def test_matches_scipy_average_linkage(self, seed, n):
        r = np.random.default_rng(seed)
        pts = r.standard_normal((n, 3))
        d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
        for m in range(1, n + 1):
            assert agglomerate_labels(d, m) == scipy_average_clusters(d, m)

    @given(st.integers(0, 10_000), st.integers(1, 12))
    def test_partition_valid(self, seed, n):
        r = np.random.default_rng(seed)
        pts = r.standard_normal((n, 2))
        d = DistanceMatrix(_ids(n), np.linalg.norm(pts[:, None] - pts[None], axis=2))
        m = int(r.integers(1, n + 1))
        p = agglomerate(d, m)
        assert len(p.groups) == m and p.nodes == _ids(n) and all(p.groups)


class TestObjective:
    def test_single_pair(self):
        d = _line_matrix([0, 2.5])
        assert supernode_objective(d, SupernodePartition([_ids(2)])) == pytest.approx(2.5)
        assert supernode_objective(d, SupernodePartition([[F(0, 0)], [F(0, 1)]])) == 0.0

    def test_blob_hand_computed(self):
        d = _line_matrix([0, 0.1, 10, 10.1])
        part = SupernodePartition([[F(0, 0), F(0, 1)], [F(0, 2), F(0, 3)]])
        assert supernode_objective(d, part) == pytest.approx(0.1 + 0.1)
        bad = SupernodePartition([[F(0, 0), F(0, 2)], [F(0, 1), F(0, 3)]])
        assert supernode_objective(d, bad) == pytest.approx(10.0 + 10.0)

    def test_unknown_node(self):
        with pytest.raises(UnknownNode):
            supernode_objective(_line_matrix([0, 1]), SupernodePartition([[F(3, 3)]]))

    def test_partition_validation_and_json(self):
        with pytest.raises(SemotError):
            SupernodePartition([[F(0, 0)], [F(0, 0)]])
        with pytest.raises(SemotError):
            SupernodePartition([[]])
        p = SupernodePartition([[F(1, 0), F(0, 2)], [F(0, 1)]], 1.5)
        assert p.groups == ((F(0, 1),), (F(0, 2), F(1, 0)))
        assert SupernodePartition.from_json(p.to_json()) == p


class TestVoronoi:
    def test_examples(self):
        a = voronoi_assign(EmpiricalDistribution.dirac([0.0]), [-1.0, 1.0])
        assert a.scores.tolist() == [1.0, 1.0] and a.assigned == 0 and a.gamma == 0.0
        b = voronoi_assign(EmpiricalDistribution.dirac([0.0]), [-1.0, 3.0])
        assert b.assigned == 0 and b.gamma == 2.0

    def test_gaussian_samples(self):
        r = np.random.default_rng(0)
        z = -1.0 + 0.6 * r.standard_normal(200_000)
        a = voronoi_assign(EmpiricalDistribution.uniform(z[:, None]), [-2.0, 2.0])
        assert a.assigned == 0
        assert a.scores[0] == pytest.approx(1.0238, abs=0.01)
        assert a.scores[1] == pytest.approx(3.0, abs=0.01)
        assert a.gamma == pytest.approx(1.976, abs=0.01)

    def test_errors(self):
        with pytest.raises(SemotError):
            voronoi_assign(EmpiricalDistribution.dirac([0.0]), [1.0])
        with pytest.raises(SemotError):
            voronoi_assign(EmpiricalDistribution.dirac([0.0, 1.0]), [[1.0], [2.0]])

    def test_from_scores(self):
        a = assignment_from_scores([3.0, 1.0, 2.0])
        assert (a.assigned, a.gamma) == (1, 1.0)


class TestCenters:
    def test_examples(self):
        dists = {F(0, 0): EmpiricalDistribution.dirac([0.0, 0.0]), F(0, 1): EmpiricalDistribution.dirac([2.0, 2.0]),
                 F(0, 2): EmpiricalDistribution.dirac([5.0, 1.0])}
        part = SupernodePartition([[F(0, 0), F(0, 1)], [F(0, 2)]])
        assert np.allclose(supernode_centers(part, dists), [[1.0, 1.0], [5.0, 1.0]])

    def test_two_blob_centers_near_truth(self):
        spec = two_blob_spec(30, seed=4)
        c = generate(spec)
        part = SupernodePartition(spec.planted_supernodes)
        dists, _ = node_distributions(circuit_nodes(spec), c.store, c.activations, spec.k)
        centers = supernode_centers(part, dists)
        for center, group in zip(centers, part.groups):
            members = np.stack([dists[n].weights @ dists[n].support for n in group])
            assert np.linalg.norm(center - members.mean(axis=0)) < 1e-9
        assert np.linalg.norm(centers[0] - centers[1]) > 1.0


class TestModular:
    def _parts(self):
        a = [F(0, i) for i in range(3)]
        b = [F(1, i) for i in range(3)]
        return [SupernodePartition([a, b]), SupernodePartition([a[:2], b]), SupernodePartition([a, b[1:]])]

    def test_jaccard_bounds_and_examples(self):
        nodes, j = jaccard_affinity(self._parts())
        assert np.all((j >= 0) & (j <= 1)) and np.allclose(np.diag(j), 1)
        i0, i1 = nodes.index(F(0, 0)), nodes.index(F(0, 1))
        assert j[i0, i1] == 1.0
        assert j[i0, nodes.index(F(1, 0))] == 0.0
        assert j[i0, nodes.index(F(0, 2))] == pytest.approx(2 / 3)

    def test_recovers_blocks(self):
        groups = modular_groups(self._parts(), 2)
        assert groups == [[F(0, 0), F(0, 1), F(0, 2)], [F(1, 0), F(1, 1), F(1, 2)]]

    def test_errors(self):
        with pytest.raises(DisconnectedAndOverclustered):
            modular_groups(self._parts(), 7)
        with pytest.raises(InvalidClusterCount):
            modular_groups(self._parts(), 0)
        with pytest.raises(SemotError):
            modular_groups(self._parts()[:1], 2)

    def test_min_cooccurrence(self):
        parts = self._parts()
        nodes = sorted({n for p in parts for n in p.nodes})
        co = cooccurrence_counts(parts, nodes)
        assert co[nodes.index(F(0, 0)), nodes.index(F(0, 2))] == 2
        # only pairs seen together in all three partitions survive
        groups = modular_groups(parts, 4, min_cooccurrence=3)
        assert groups == [[F(0, 0), F(0, 1)], [F(0, 2)], [F(1, 0)], [F(1, 1), F(1, 2)]]

    def test_deterministic(self):
        assert modular_groups(self._parts(), 3) == modular_groups(self._parts(), 3)
