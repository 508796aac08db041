import numpy as np
import pytest

from nsgraph import (
    ComponentLabeling,
    EdgeScores,
    FilterError,
    FilterPredicate,
    component_purity,
    filter_edges,
    scc,
    score_all_edges,
)
from nsgraph.filter_components import canonical_labeling

from .conftest import random_knn_graph, synthetic_graph


def scc_oracle(n, edges):
    """Transitive-closure reachability oracle: mutually reachable nodes share a group."""
    reach = np.eye(n, dtype=bool)
    for a, b in edges:
        reach[a, b] = True
    for m in range(n):
        reach |= reach[:, m : m + 1] & reach[m : m + 1, :]
    mutual = reach & reach.T
    return {frozenset(np.flatnonzero(mutual[i])) for i in range(n)}


class TestFilterPredicate:
    def test_exactly_one_variant(self):
        with pytest.raises(FilterError):
            FilterPredicate()
        with pytest.raises(FilterError):
            FilterPredicate(sa_min=0.5, sk_max=3, sj_min=1)
        with pytest.raises(FilterError):
            FilterPredicate(sk_max=3)  # missing sj_min

    def test_sa_range_checked(self):
        with pytest.raises(FilterError):
            FilterPredicate.combined(1.5)

    def test_sa_zero_keeps_everything(self, rng):
        g = random_knn_graph(rng, 30, 5)
        s = score_all_edges(g)
        mask = filter_edges(g, s, FilterPredicate.combined(0.0))
        assert mask.all()

    def test_sa_boundary_strict(self):
        g = synthetic_graph(np.array([[1, 2], [0, 2], [0, 1]]))
        s = EdgeScores(
            sk=np.zeros(6, dtype=np.int64),
            sj=np.zeros(6, dtype=np.int64),
            sa=np.array([0.79, 0.78999, 0.8, 0.79, 0.5, 1.0]),
            k=2,
        )
        mask = filter_edges(g, s, FilterPredicate.combined(0.79))
        np.testing.assert_array_equal(mask, [True, False, True, True, False, True])

    def test_counts_boundary(self):
        # k=16 admits sK=15 and sJ=4; edge kept iff sK <= 14 and sJ >= 4
        nb = np.array([[(i + j + 1) % 17 for j in range(16)] for i in range(17)])
        g = synthetic_graph(nb)
        s = EdgeScores(
            sk=np.resize(np.array([14, 15, 14]), g.n_edges).astype(np.int64),
            sj=np.resize(np.array([4, 4, 3]), g.n_edges).astype(np.int64),
            sa=np.full(g.n_edges, 0.5),
            k=16,
        )
        mask = filter_edges(g, s, FilterPredicate.counts(sk_max=14, sj_min=4))
        np.testing.assert_array_equal(mask[:3], [True, False, False])
        # and the pattern repeats across all edges
        np.testing.assert_array_equal(mask, np.resize([True, False, False], g.n_edges))

    def test_misaligned_scores(self, rng):
        g = random_knn_graph(rng, 10, 3)
        s = EdgeScores(
            sk=np.zeros(5, dtype=np.int64),
            sj=np.zeros(5, dtype=np.int64),
            sa=np.full(5, 0.5),
            k=3,
        )
        with pytest.raises(Exception, match="aligned"):
            filter_edges(g, s, FilterPredicate.combined(0.5))

    def test_mask_does_not_mutate(self, rng):
        g = random_knn_graph(rng, 15, 4)
        s = score_all_edges(g)
        before = g.neighbors.copy()
        filter_edges(g, s, FilterPredicate.combined(0.5))
        np.testing.assert_array_equal(g.neighbors, before)


class TestScc:
    def test_directed_three_cycle(self):
        g = synthetic_graph(np.array([[1], [2], [0]]))
        lab = scc(g, np.ones(3, dtype=bool))
        assert lab.n_components == 1
        assert lab.sizes[0] == 3

    def test_chain_gives_singletons(self):
        # a->b->c and c->a removed by mask: no mutual reachability
        g = synthetic_graph(np.array([[1], [2], [0]]))
        mask = np.array([True, True, False])
        lab = scc(g, mask)
        assert lab.n_components == 3
        assert set(lab.sizes) == {1}

    def test_matches_reachability_oracle(self, rng):
        for _ in range(60):
            n = int(rng.integers(2, 9))
            k = int(rng.integers(1, n))
            g = random_knn_graph(rng, n, k)
            mask = rng.random(g.n_edges) < 0.5
            lab = scc(g, mask)
            got = {
                frozenset(np.flatnonzero(lab.component_id == c))
                for c in range(lab.n_components)
            }
            edges = list(
                zip(g.edge_sources()[mask].tolist(), g.edge_targets()[mask].tolist())
            )
            assert got == scc_oracle(n, edges)

    def test_invariant_to_edge_enumeration_order(self):
        a = synthetic_graph(np.array([[1, 2], [0, 2], [0, 1]]))
        b = synthetic_graph(np.array([[2, 1], [2, 0], [1, 0]]))
        la = scc(a, np.ones(6, dtype=bool))
        lb = scc(b, np.ones(6, dtype=bool))
        np.testing.assert_array_equal(la.component_id, lb.component_id)

    def test_label_order_size_then_min_id(self):
        # two 2-cycles and one 3-cycle: sizes 3,2,2; equal sizes ordered by min node id
        nb = np.array([[1], [0], [3], [2], [5], [6], [4]])
        g = synthetic_graph(nb)
        lab = scc(g, np.ones(7, dtype=bool))
        np.testing.assert_array_equal(lab.sizes, [3, 2, 2])
        assert lab.component_id[4] == 0  # the triangle 4,5,6
        assert lab.component_id[0] == 1  # pair {0,1} beats pair {2,3} on min id
        assert lab.component_id[2] == 2

    def test_filtering_monotone_nesting(self, rng):
        g = random_knn_graph(rng, 80, 8)
        s = score_all_edges(g)
        for t_strict, t_lenient in [(0.9, 0.6), (0.7, 0.3), (0.5, 0.0)]:
            strict = scc(g, filter_edges(g, s, FilterPredicate.combined(t_strict)))
            lenient = scc(g, filter_edges(g, s, FilterPredicate.combined(t_lenient)))
            for c in range(strict.n_components):
                members = np.flatnonzero(strict.component_id == c)
                assert np.unique(lenient.component_id[members]).size == 1


class TestCanonicalLabeling:
    def test_relabels_by_size(self):
        raw = np.array([7, 7, 7, 3, 3, 9])
        lab = canonical_labeling(raw)
        np.testing.assert_array_equal(lab.component_id, [0, 0, 0, 1, 1, 2])
        np.testing.assert_array_equal(lab.sizes, [3, 2, 1])

    def test_rejects_inconsistent(self):
        with pytest.raises(FilterError):
            ComponentLabeling(component_id=np.array([0, 2]), sizes=np.array([1, 0, 1]))


class TestComponentPurity:
    def test_single_class(self):
        lab = canonical_labeling(np.array([0, 0, 1, 1]))
        purity = component_purity(lab, np.array([5, 5, 5, 5]))
        np.testing.assert_allclose(purity, [1.0, 1.0])

    def test_two_thirds(self):
        lab = canonical_labeling(np.array([0, 0, 0]))
        purity = component_purity(lab, np.array([1, 1, 2]))
        np.testing.assert_allclose(purity, [2 / 3])

    def test_requires_labels(self):
        lab = canonical_labeling(np.array([0, 0]))
        with pytest.raises(FilterError):
            component_purity(lab, None)
