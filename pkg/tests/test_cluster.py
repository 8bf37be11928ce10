import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kcluster.cluster import (
    DECLARED_PRACTICAL,
    SimilarityGraph,
    TestParams,
    connected_components,
    k_cluster_test,
    oracle_cluster_test,
    practical_params,
    sample_slots,
    theory_params,
)
from kcluster.errors import InputError
from kcluster.generators import far_instance_disjoint, planted_clusterable, random_regular_expander
from kcluster.graph import BoundedDegreeGraph, CountingOracle
from kcluster.walks import CounterRNG, exact_distributions, reference_walk


@pytest.fixture(scope="module")
def planted3000():
    return planted_clusterable([1500, 1500], 8, 3, 17)


@pytest.fixture(scope="module")
def far3000():
    return far_instance_disjoint(3, 1000, 8, 18)


class TestParamsFormulas:
    def test_theory_s(self):
        p = theory_params(4096, 8, 2, 0.5, 0.5)
        assert p.s == math.ceil(1536 * 2 * math.log(24) / 0.25) == 39052

    def test_theory_ell(self):
        assert theory_params(4096, 8, 2, 0.5, 0.5).ell == 768

    def test_theory_sigma_xi_delta(self):
        p = theory_params(4096, 8, 2, 0.5, 0.5)
        assert p.sigma == pytest.approx(192 * p.s * 2 / 4096)
        assert p.xi == 1 / (4 * 4096) and p.delta == pytest.approx(1 / (12 * p.s**2))
        assert p.mode == "theory"

    def test_practical_s_declared(self):
        p = practical_params(1000, 8, 2, calibrated=False)
        assert p.s == max(9, math.ceil(8 * 2 * math.log(24))) == 51

    def test_practical_r_declared(self):
        p = practical_params(10**4, 8, 2, calibrated=False)
        assert p.r == math.ceil(4 * math.sqrt(2 * 10**4) * math.log(52))

    def test_practical_overrides(self):
        p = practical_params(1000, 8, 2, overrides={"c_s": 1.0}, calibrated=False)
        assert p.s == 9  # floor 3(k+1)
        assert p.constants["c_s"] == 1.0

    def test_declared_constants(self):
        p = practical_params(1000, 8, 2, calibrated=False)
        assert p.constants == DECLARED_PRACTICAL

    @pytest.mark.parametrize("eps", [0.0, 0.6])
    def test_bad_epsilon(self, eps):
        with pytest.raises(InputError):
            practical_params(100, 4, 2, epsilon=eps)

    def test_roundtrip(self):
        p = practical_params(500, 4, 3)
        assert TestParams.from_dict(p.to_dict()) == p

    def test_query_budget(self):
        p = practical_params(500, 4, 2)
        assert p.query_budget() == p.s * (p.batches + 1) * p.r * p.ell

    def test_mismatch(self):
        g = random_regular_expander(20, 4, 0)
        with pytest.raises(InputError, match="n="):
            k_cluster_test(g, practical_params(21, 4, 1), 0)


class TestComponents:
    def test_no_edges(self):
        assert connected_components(SimilarityGraph([0] * 5, [])) == 5

    def test_complete(self):
        edges = [(i, j) for i in range(6) for j in range(i + 1, 6)]
        assert connected_components(SimilarityGraph(list(range(6)), edges)) == 1

    def test_two_cliques(self):
        edges = [(0, 1), (0, 2), (1, 2), (3, 4)]
        assert connected_components(SimilarityGraph(list(range(5)), edges)) == 2

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 12), st.data())
    def test_adding_edge_never_increases(self, s, data):
        pairs = [(i, j) for i in range(s) for j in range(i + 1, s)]
        if not pairs:
            return
        edges = data.draw(st.lists(st.sampled_from(pairs), unique=True))
        extra = data.draw(st.sampled_from(pairs))
        before = connected_components(SimilarityGraph(list(range(s)), edges))
        after = connected_components(SimilarityGraph(list(range(s)), edges + [extra]))
        assert after <= before


def small_params(n, k=1, s=6, ell=5, r=10, batches=3, sigma=1e9):
    return TestParams(n, k, s, ell, sigma, r, 1 / (4 * n), 0.01, batches)


class TestSampledTester:
    def test_singleton_accepts(self):
        g = BoundedDegreeGraph(1, 3, [[]])
        p = small_params(1, sigma=10.0)
        rep = k_cluster_test(g, p, 0)
        assert rep.accepted and rep.component_count == 1
        assert oracle_cluster_test(g, p).accepted

    def test_deterministic(self):
        g = random_regular_expander(80, 4, 1)
        p = practical_params(80, 4, 1)
        a, b = k_cluster_test(g, p, 5), k_cluster_test(g, p, 5)
        da, db = a.to_dict(True), b.to_dict(True)
        da.pop("wall_time"), db.pop("wall_time")
        assert da == db

    def test_query_count_matches_instrumented_walks(self):
        g = random_regular_expander(40, 4, 3)
        p = small_params(40)
        rep = k_cluster_test(g, p, seed=11)
        oracle = CountingOracle(g)
        rng = CounterRNG(11)
        S = sample_slots(g, p, 11)
        m = p.batches
        for i, v in enumerate(S):
            for b in range(m + 1):
                for w in range(p.r):
                    reference_walk(oracle, int(v), p.ell, rng, (i * (m + 1) + b) * p.r + w)
        assert rep.queries == oracle.queries
        assert rep.queries <= p.query_budget()

    def test_norm_rejection_stops_early(self):
        g = random_regular_expander(40, 4, 3)
        p = small_params(40, sigma=1e-9)
        rep = k_cluster_test(g, p, seed=2)
        assert rep.verdict == "reject" and rep.reject_reason == "norm_screen"
        assert rep.similarity is None
        assert rep.queries <= p.s * p.r * p.ell

    def test_edges_match_verdicts(self):
        inst = planted_clusterable([100, 100], 6, 1, 2)
        p = practical_params(200, 6, 2)
        rep = k_cluster_test(inst.graph, p, 3)
        H = rep.similarity
        accepted = {pair for pair, v in H.per_pair_verdicts.items() if v.accepted}
        assert set(map(tuple, H.edges)) == accepted
        assert rep.accepted == (rep.component_count <= p.k)

    def test_planted_accepts(self, planted3000):
        p = practical_params(3000, 8, 2)
        acc = sum(k_cluster_test(planted3000.graph, p, seed).accepted for seed in range(100))
        assert acc >= 67

    def test_far_rejects(self, far3000):
        p = practical_params(3000, 8, 2)
        rej = sum(not k_cluster_test(far3000.graph, p, seed).accepted for seed in range(100))
        assert rej >= 67


class TestOracleTester:
    def test_planted_accepts(self, planted3000):
        p = practical_params(3000, 8, 2)
        assert all(oracle_cluster_test(planted3000.graph, p, seed).accepted for seed in range(5))

    def test_far_rejects(self, far3000):
        p = practical_params(3000, 8, 2)
        assert not any(oracle_cluster_test(far3000.graph, p, seed).accepted for seed in range(5))

    def test_same_cluster_good_vertices_joined(self, planted3000):
        g = planted3000.graph
        p = practical_params(3000, 8, 2)
        lab = planted3000.labels()
        for seed in range(3):
            rep = oracle_cluster_test(g, p, seed)
            S = np.asarray(rep.similarity.sample_vertices)
            P = exact_distributions(g, S, p.ell)
            norms = np.einsum("ij,ij->j", P, P)
            D = norms[:, None] + norms[None, :] - 2 * P.T @ P
            edges = set(map(tuple, rep.similarity.edges))
            for i in range(len(S)):
                for j in range(i + 1, len(S)):
                    if lab[S[i]] == lab[S[j]] and D[i, j] <= 1 / (4 * g.n):
                        assert (i, j) in edges

    def test_agreement_with_sampled(self, planted3000, far3000):
        p = practical_params(3000, 8, 2)
        agree = total = 0
        for g in (planted3000.graph, far3000.graph):
            truth = oracle_cluster_test(g, p).accepted
            for seed in range(50):
                agree += k_cluster_test(g, p, seed).accepted == truth
                total += 1
        assert agree >= 0.9 * total
