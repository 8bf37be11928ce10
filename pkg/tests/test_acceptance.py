"""End-to-end acceptance criteria, one test per criterion.

Each test prints a ``CRITERION n PASS|FAIL`` line (also repeated in the
terminal summary) before asserting, so a failing criterion still reports
its measured numbers.
"""

import math
import time
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest

from kcluster.cli import bench_sizes, loglog_slope, main, replay_record
from kcluster.cluster import k_cluster_test, oracle_cluster_test, practical_params
from kcluster.corpus import save_corpus, standard_corpus
from kcluster.distributions import l2_distance_estimate, l2_norm_estimate
from kcluster.errors import ConstructionError
from kcluster.farness import construct_s, max_removable, repair_alpha, repair_to_expander
from kcluster.generators import dumbbell, low_conductance_family, random_graph_with_degrees, random_regular_expander
from kcluster.graph import BoundedDegreeGraph, min_conductance_bruteforce
from kcluster.spectral import (
    cheeger_check,
    eigengap_report,
    eigensolve,
    rho_k_bruteforce,
    tightness_potential,
    verify_spectral_facts,
    within_cluster_distance_audit,
)
from kcluster.walks import SampleCounts, exact_distribution, walk_endpoints

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def corpus():
    return standard_corpus(20)


def small_corpus():
    """Brute-forceable instances (n <= 24)."""
    graphs = [BoundedDegreeGraph(1, 3, [[]])]
    graphs.append(BoundedDegreeGraph.from_edges(4, 3, list(combinations(range(4), 2))))
    graphs.append(BoundedDegreeGraph.from_edges(6, 2, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]))
    for n in (5, 8, 12, 17, 24):
        graphs += [low_conductance_family("cycle", n), low_conductance_family("path", n)]
    graphs += [low_conductance_family("grid", 9), low_conductance_family("grid", 16)]
    for seed, (m, d) in enumerate([(10, 3), (12, 4), (16, 3), (20, 4), (24, 5), (11, 4)]):
        graphs.append(random_regular_expander(m, d, seed))
    for seed in range(4):
        graphs.append(dumbbell(12, 4, 1 + seed % 3, seed).graph)
        graphs.append(dumbbell(6, 4, 1, 10 + seed).graph)
    return graphs


def test_criterion_01_oracle_path(corpus, report_criterion):
    t0 = time.perf_counter()
    wrong = []
    for e in corpus:
        p = practical_params(e.graph.n, e.graph.d, e.k)
        first = oracle_cluster_test(e.graph, p, 0)
        again = oracle_cluster_test(e.graph, p, 0)
        if first.accepted != e.expect_accept or again.to_dict()["similarity"] != first.to_dict()["similarity"]:
            wrong.append(e.name)
    elapsed = time.perf_counter() - t0
    ok = not wrong and elapsed < 600
    report_criterion(1, "oracle-path correctness",
                     ok, f"{len(corpus) - len(wrong)}/{len(corpus)} correct, {elapsed:.1f}s (limit 600s) {wrong}")
    assert ok


def test_criterion_02_statistical_tester(corpus, report_criterion):
    t0 = time.perf_counter()
    worst_accept, worst_reject, failing = 1.0, 1.0, []
    for e in corpus:
        p = practical_params(e.graph.n, e.graph.d, e.k)
        good = sum(k_cluster_test(e.graph, p, seed).accepted == e.expect_accept for seed in range(100))
        rate = good / 100
        if e.expect_accept:
            worst_accept = min(worst_accept, rate)
        else:
            worst_reject = min(worst_reject, rate)
        if rate < 2 / 3:
            failing.append((e.name, rate))
    elapsed = time.perf_counter() - t0
    ok = not failing and elapsed < 1800
    report_criterion(2, "statistical tester", ok,
                     f"min accept rate {worst_accept:.2f}, min reject rate {worst_reject:.2f} "
                     f"over 100 trials x {len(corpus)} instances, {elapsed:.1f}s (limit 1800s) {failing}")
    assert ok


def test_criterion_03_estimator_unbiasedness(report_criterion):
    trials, r = 10_000, 40
    g1 = random_regular_expander(30, 4, 1)
    g2 = dumbbell(10, 4, 1, 2).graph
    g3 = low_conductance_family("path", 12)
    refs = [(g1, 0, 3), (g1, 5, 8), (g2, 0, 4), (g2, 15, 10), (g3, 0, 6)]
    worst = 0.0
    rows = []
    for idx, (g, v, t) in enumerate(refs):
        # norm estimate of p_v^t
        ends, _ = walk_endpoints(g, [v], t, r * trials, seed=100 + idx)
        batches = ends[0].reshape(trials, r)
        est = np.array([l2_norm_estimate(SampleCounts.from_endpoints(b, v, t)) for b in batches])
        p = exact_distribution(g, v, t).probs
        z = abs(est.mean() - p @ p) / (est.std(ddof=1) / math.sqrt(trials))
        # distance estimate between p_v^t and p_u^t for a second start u on the same graph
        u = (v + g.n // 2) % g.n
        ends2, _ = walk_endpoints(g, [u], t, r * trials, seed=200 + idx)
        b2 = ends2[0].reshape(trials, r)
        dest = np.array([l2_distance_estimate(SampleCounts.from_endpoints(a, v, t), SampleCounts.from_endpoints(b, u, t))
                         for a, b in zip(batches, b2)])
        q = exact_distribution(g, u, t).probs
        zd = abs(dest.mean() - (p - q) @ (p - q)) / (dest.std(ddof=1) / math.sqrt(trials))
        rows.append(f"{z:.2f}/{zd:.2f}")
        worst = max(worst, z, zd)
    ok = worst <= 4
    report_criterion(3, "estimator unbiasedness", ok,
                     f"max |mean - exact| = {worst:.2f} SE (limit 4); per distribution norm/distance: {rows}")
    assert ok


def test_criterion_04_spectral_facts(corpus, report_criterion):
    worst, mult_ok, fails, checked = 0.0, 0, [], 0
    graphs = [(e.name, e.graph) for e in corpus] + [(f"small{i}", g) for i, g in enumerate(small_corpus())]
    for name, g in graphs:
        if g.n > 4000:
            continue
        checked += 1
        rep = eigensolve(g)
        ncomp, _ = g.component_labels()
        mult_ok += rep.zero_multiplicity() == ncomp
        for v in {0, g.n // 3, g.n - 1}:
            for t in (0, 1, 10, 50):
                res = verify_spectral_facts(g, rep, v, t)
                worst = max(worst, res["indicator_expansion"], res["row_norm"], res["walk_expansion"])
                if not res["holds"]:
                    fails.append((name, v, t))
    ok = not fails and mult_ok == checked
    report_criterion(4, "spectral fact suite", ok,
                     f"max residual {worst:.2e} (limit 1e-8) on {checked} instances; "
                     f"zero multiplicity = components on {mult_ok}/{checked}")
    assert ok


def test_criterion_05_cheeger_and_higher_order(corpus, report_criterion):
    fails = []
    small = small_corpus()
    n_rho = 0
    for i, g in enumerate(small):
        if not cheeger_check(g).holds:
            fails.append(f"cheeger small{i}")
        if g.n <= 12:
            lam = eigensolve(g).eigenvalues
            for k in (2, 3):
                if k <= g.n:
                    n_rho += 1
                    if lam[k - 1] / 2 > float(rho_k_bruteforce(g, k)) + 1e-12:
                        fails.append(f"rho k={k} small{i}")
    planted = [e for e in corpus if e.expect_accept]
    for e in planted:
        if not eigengap_report(e.instance)["holds"]:
            fails.append(f"eigen bound {e.name}")
    ok = not fails
    report_criterion(5, "Cheeger and higher-order checks", ok,
                     f"{len(small)} exact Cheeger sandwiches, {n_rho} rho checks, "
                     f"{len(planted)} planted eigenvalue bounds; failures: {fails}")
    assert ok


def test_criterion_06_within_cluster_audits(corpus, report_criterion):
    rows, fails = [], []
    for e in corpus:
        if not e.expect_accept:
            continue
        p = practical_params(e.graph.n, e.graph.d, e.k)
        a = within_cluster_distance_audit(e.instance, p.ell, s=p.s, k=e.k)
        rows.append((a["within_pair_fraction"], a["cross_fraction"], a["norm_fraction"]))
        if not (a["in_window"] and a["within_pair_fraction"] >= 0.95 and a["cross_fraction"] == 1.0
                and a["norm_fraction"] >= 0.95):
            fails.append(e.name)
    w, c, nrm = (min(x) for x in zip(*rows))
    ok = not fails
    report_criterion(6, "within-cluster audits", ok,
                     f"min within-pair {w:.4f} (>=0.95), min cross {c:.4f} (=1), min norm {nrm:.4f} (>=0.95) "
                     f"on {len(rows)} planted instances at t = calibrated walk length; failures: {fails}")
    assert ok


def test_criterion_07_tightness(report_criterion):
    passed, ratios = 0, []
    for i in range(20):
        half = 40 + 10 * i
        d = (4, 6, 8)[i % 3]
        if half * (d - 1) % 2:
            half += 1
        cut = 1 + (i * 7) % (half // 4)
        inst = dumbbell(half, d, cut, 3000 + i)
        assert max(inst.realized_phi_out()) <= Fraction(1, 4 * d)
        res = tightness_potential(inst)
        passed += res["holds"]
        ratios.append(res["max_potential"] / res["bound"])
    ok = passed == 20
    report_criterion(7, "tightness potential", ok,
                     f"{passed}/20 dumbbells with max potential >= phi_out/(24 d^3); min ratio {min(ratios):.3g}")
    assert ok


def test_criterion_08_farness_machinery(report_criterion):
    rng = np.random.default_rng(8)
    pool_ok = 0
    for i in range(100):
        d = int(rng.integers(3, 7))
        n = int(rng.integers(30, 300))
        deg = rng.integers(1, d + 1, size=n)
        if deg.sum() % 2:
            deg[0] = deg[0] - 1 if deg[0] > 1 else deg[0] + 1
        g = random_graph_with_degrees(deg, d, rng)
        A = rng.choice(n, size=int(rng.integers(0, max_removable(n, 0.3) + 1)), replace=False)
        try:
            S = construct_s(g, A.tolist())
            pool_ok += 6 * len(S.pool) >= n
        except ConstructionError:
            pass
    repair_ok = 0
    for i in range(100):
        d = int(rng.integers(3, 7))
        n = int(rng.integers(100, 400))
        n += (n * d) % 2
        g = random_regular_expander(n, d, rng)
        A = rng.choice(n, size=int(rng.integers(1, max_removable(n, 0.3) + 1)), replace=False)
        res = repair_to_expander(g, A.tolist(), rng)
        H = res.graph
        repair_ok += bool(H.degrees.max() <= d and res.edits <= (d + 4) * len(A))
    brute_runs = brute_ok = 0
    for i in range(20):
        n, d = [(16, 3), (18, 4), (20, 3), (20, 4)][i % 4]
        g = random_regular_expander(n, d, 500 + i)
        eps = 0.5
        A = rng.choice(n, size=int(rng.integers(1, max_removable(n, eps) + 1)), replace=False).tolist()
        alpha = repair_alpha(g, A)
        if alpha <= 0:
            continue
        brute_runs += 1
        H = repair_to_expander(g, A, 900 + i, epsilon=eps).graph
        brute_ok += min_conductance_bruteforce(H) >= alpha
    ok = pool_ok == 100 and repair_ok == 100 and brute_ok == brute_runs and brute_runs > 0
    report_criterion(8, "farness machinery", ok,
                     f"pool >= n/6 on {pool_ok}/100, repair within degree and edit budget {repair_ok}/100, "
                     f"exhaustive phi(H) >= alpha on {brute_ok}/{brute_runs}")
    assert ok


def test_criterion_09_query_scaling(report_criterion):
    rows = bench_sizes([1000, 10_000, 100_000], trials=3, seed=0)
    slope = loglog_slope([r["n"] for r in rows], [r["mean_queries"] for r in rows])
    ok = 0.45 <= slope <= 0.65
    detail = ", ".join(f"n={r['n']}: {r['mean_queries']:.3g}" for r in rows)
    report_criterion(9, "query scaling", ok, f"log-log slope {slope:.3f} (window [0.45, 0.65]); {detail}")
    assert ok


def test_criterion_10_replay(corpus, tmp_path, report_criterion):
    import json

    picks = [corpus[i] for i in (0, 7, 13, 20, 28, 35)]
    save_corpus(picks, tmp_path)
    records = []
    for j, e in enumerate(picks):
        out = tmp_path / f"{e.name}.jsonl"
        trials = 9 if j < 4 else 7
        assert main(["test", str(tmp_path / e.name), "--k", str(e.k), "--trials", str(trials),
                     "--seed", str(50 * j), "--out", str(out)]) == 0
        records += [json.loads(x) for x in out.read_text().splitlines()]
    sample = records[:50]
    same = 0
    for rec in sample:
        rep = replay_record(rec)
        orig = dict(rec["report"])
        rep.pop("wall_time"), orig.pop("wall_time")
        same += rep == orig
    ok = same == 50 and len(sample) == 50
    report_criterion(10, "replay determinism", ok, f"{same}/{len(sample)} records reproduced bit-exactly")
    assert ok
