import math
from fractions import Fraction

import numpy as np
import pytest

from kcluster.errors import ConstructionError, InputError
from kcluster.farness import (
    PairSet,
    construct_s,
    cut_total,
    iterative_partition,
    max_removable,
    repair_alpha,
    repair_to_expander,
    sparse_cut_search,
)
from kcluster.generators import far_instance_disjoint, low_conductance_family, planted_clusterable, random_regular_expander
from kcluster.graph import BoundedDegreeGraph, min_conductance_bruteforce, outer_conductance
from kcluster.spectral import lambda2


class TestPairSet:
    def test_disjoint(self):
        with pytest.raises(InputError):
            PairSet(((0, 1), (1, 2)))

    def test_ordered(self):
        with pytest.raises(InputError):
            PairSet(((2, 1),))

    def test_slots(self):
        assert PairSet(((0, 0), (1, 2))).slots() == [0, 0, 1, 2]


class TestConstructS:
    def test_regular_graph_uses_matching(self):
        g = random_regular_expander(90, 4, 0)
        A = [0, 1, 2]
        S = construct_s(g, A)
        assert len(S) == 1
        for u, v in S.pool:
            assert u not in A and v not in A
            assert u == v or v in g.adjacency[u]
        assert 6 * len(S.pool) >= g.n

    def test_low_degree_self_pairs(self):
        g = low_conductance_family("path", 30)
        g = BoundedDegreeGraph.from_edges(30, 4, g.edges.tolist())
        S = construct_s(g, [5])
        assert all(u == v for u, v in S.pool)  # every vertex has degree <= d-2

    def test_size_limit(self):
        g = random_regular_expander(18, 4, 0)
        assert max_removable(18, 0.3) == 1
        with pytest.raises(InputError):
            construct_s(g, [0, 1])

    def test_pool_too_small(self):
        # removing every vertex leaves no candidate pairs at all
        g = BoundedDegreeGraph.from_edges(3, 2, [(0, 1), (1, 2), (0, 2)])
        with pytest.raises(ConstructionError):
            construct_s(g, [0, 1, 2], epsilon=9.0)


class TestRepair:
    @pytest.mark.parametrize("seed", range(5))
    def test_budget_and_bound(self, seed):
        g = random_regular_expander(300, 4, seed)
        rng = np.random.default_rng(seed)
        A = sorted(rng.choice(300, size=max_removable(300, 0.3), replace=False).tolist())
        res = repair_to_expander(g, A, seed)
        assert res.edits <= (g.d + 4) * len(A)
        assert res.graph.degrees.max() <= g.d
        assert lambda2(res.graph) > 0
        assert res.c_exp_certified is not None and res.c_exp_certified >= 0.02

    @pytest.mark.parametrize("size", [1, 2, 5])
    def test_small_cases_connect_a(self, size):
        n = 9 * size * 4
        g = random_regular_expander(n, 4, size)
        A = list(range(size))
        res = repair_to_expander(g, A, 0)
        assert res.edits <= (g.d + 4) * size
        ncomp, _ = res.graph.component_labels()
        assert ncomp == 1

    def test_needs_degree_three(self):
        with pytest.raises(InputError):
            repair_to_expander(low_conductance_family("cycle", 30), [0], 0)

    def test_bruteforce_conductance_exceeds_alpha(self):
        for seed in range(5):
            g = random_regular_expander(20, 4, seed)
            res = repair_to_expander(g, [seed], seed)
            alpha = repair_alpha(g, [seed])
            assert alpha > 0
            assert min_conductance_bruteforce(res.graph) >= alpha

    def test_alpha_formula(self):
        g = random_regular_expander(20, 4, 0)
        alpha = repair_alpha(g, [0])
        assert alpha <= Fraction(1, 50) / (150 * 4)


class TestSparseCut:
    def test_exact_on_path(self):
        g = low_conductance_family("path", 10)
        S, phi = sparse_cut_search(g, "exact")
        assert phi == Fraction(1, 10) == outer_conductance(g, S)

    def test_sweep_prefers_component(self):
        inst = far_instance_disjoint(2, 30, 4, 0)
        S, phi = sparse_cut_search(inst.graph)
        assert phi == 0 and len(S) == 30

    def test_bad_mode(self):
        with pytest.raises(InputError):
            sparse_cut_search(low_conductance_family("path", 5), "magic")


class TestIterativePartition:
    def test_cycle(self):
        cert = iterative_partition(low_conductance_family("cycle", 1000), 2)
        assert cert.succeeded and len(cert.parts) == 3
        assert all(cert.checks.values())
        assert cert.cut_total == cut_total(low_conductance_family("cycle", 1000), cert.parts)

    def test_far_instance_splits_into_components(self):
        inst = far_instance_disjoint(3, 300, 6, 1)
        cert = iterative_partition(inst.graph, 2)
        assert cert.succeeded and cert.cut_total == 0
        assert sorted(len(p) for p in cert.parts) == [300, 300, 300]

    def test_planted_stops(self):
        inst = planted_clusterable([300, 300], 8, 2, 3)
        cert = iterative_partition(inst.graph, 2)
        assert not cert.succeeded and len(cert.parts) == 2
        assert all(cert.checks.values())

    def test_bad_k(self):
        with pytest.raises(InputError):
            iterative_partition(low_conductance_family("path", 5), 0)


class TestRepairSizes:
    @pytest.mark.parametrize("size", [9, 10, 11, 12, 13, 14, 17])
    def test_every_small_size(self, size):
        n = 30 * size  # |A| <= ceil(0.3 n / 9)
        g = random_regular_expander(n, 4, size)
        res = repair_to_expander(g, list(range(0, 2 * size, 2)), size)
        assert res.edits <= (g.d + 4) * size
        assert res.graph.degrees.max() <= g.d


class TestSpecExamples:
    def test_empty_removal(self):
        g = random_regular_expander(60, 4, 0)
        S = construct_s(g, [])
        assert len(S) == 0

    def test_low_degree_pool_is_all_survivors(self):
        g = BoundedDegreeGraph.from_edges(30, 4, low_conductance_family("cycle", 30).edges.tolist())
        S = construct_s(g, [3])
        assert sorted(u for u, _ in S.pool) == [v for v in range(30) if v != 3]

    def test_cubic_pool_size(self):
        for seed in range(100):
            g = random_regular_expander(60, 3, seed)
            A = list(range(3))
            S = construct_s(g, A, epsilon=0.5)
            assert 6 * len(S.pool) >= g.n

    def test_single_removal_edits(self):
        # regular host: the pair is an edge, which is swapped for two edges to the vertex
        g = random_regular_expander(200, 4, 1)
        res = repair_to_expander(g, [7], 0)
        (u, v), = res.pairs.pairs
        assert u != v and v in g.adjacency[u]
        assert res.removed == 4 + 1 and res.added == 2
        assert set(res.graph.adjacency[7]) == {u, v}
        # slack host: the pair is a single vertex and only incident edges go
        h = BoundedDegreeGraph.from_edges(30, 4, low_conductance_family("cycle", 30).edges.tolist())
        res = repair_to_expander(h, [7], 0)
        (u, v), = res.pairs.pairs
        assert u == v and res.removed == 2 and res.added == 1

    def test_edit_budget_many_seeds(self):
        for seed in range(100):
            g = random_regular_expander(200, 4, seed)
            A = np.random.default_rng(seed).choice(200, size=max_removable(200, 0.3), replace=False).tolist()
            assert repair_to_expander(g, A, seed).edits <= (g.d + 4) * len(A)

    def test_exact_dumbbell_cut(self):
        from kcluster.generators import dumbbell

        inst = dumbbell(10, 4, 1, 0)
        S, phi = sparse_cut_search(inst.graph, "exact")
        assert phi == Fraction(1, 40)
        assert set(S.members) in (set(inst.parts[0].members), set(inst.parts[1].members))

    def test_sweep_recovers_large_dumbbell_side(self):
        from kcluster.generators import dumbbell

        inst = dumbbell(1000, 8, 2, 0)
        S, _ = sparse_cut_search(inst.graph)
        assert set(S.members) in (set(inst.parts[0].members), set(inst.parts[1].members))

    def test_exact_k4(self):
        K4 = BoundedDegreeGraph.from_edges(4, 3, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
        S, phi = sparse_cut_search(K4, "exact")
        assert phi == Fraction(2, 3) and len(S) == 2
