"""The sublinear k-cluster tester and its exact-distribution twin.

A run samples ``s`` vertices, screens each one's walk distribution with the
collision norm tester, then compares every pair with the median-of-batches
closeness tester.  Accepted pairs become edges of a similarity graph on the
sample; the graph is accepted iff that similarity graph has at most ``k``
connected components.

Walk indices are assigned per sample slot ``i`` and batch ``b`` (batch 0 is
the norm batch, batches ``1..m`` feed the closeness tests) as
``(i * (m + 1) + b) * r + w``, so two slots that sample the same vertex still
draw independent walks.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .distributions import (
    MAX_SAMPLES,
    TesterVerdict,
    closeness_threshold,
    collision_counts,
    count_matrix,
    median_batches,
    norm_threshold,
    pairwise_distance_estimates,
)
from .errors import CapacityError, InputError
from .graph import BoundedDegreeGraph
from .walks import exact_distributions, walk_endpoints

THEORY_CONSTANTS = {"c_ell": 1.0, "closeness_c": 8.0, "c_median": 24.0}
DECLARED_PRACTICAL = {"c_s": 8.0, "c_ell": 1.0, "c_r": 4.0, "c_sigma": 8.0, "c_median": 0.5}


@lru_cache(maxsize=1)
def calibrated_constants() -> dict:
    """Practical-mode constants shipped in ``data/practical_defaults.json`` (if present)."""
    try:
        text = resources.files("kcluster").joinpath("data/practical_defaults.json").read_text()
    except (FileNotFoundError, OSError):
        return {}
    return dict(json.loads(text).get("constants", {}))


@dataclass(frozen=True)
class TestParams:
    __test__ = False  # not a pytest class

    n: int
    k: int
    s: int
    ell: int
    sigma: float
    r: int
    xi: float
    delta: float
    batches: int
    mode: str = "practical"
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.s < self.k + 1:
            raise InputError(f"s={self.s} must be at least k+1={self.k + 1}")
        if self.ell < 1 or self.r < 2 or self.batches < 1:
            raise InputError("ell >= 1, r >= 2 and batches >= 1 are required")
        if self.sigma <= 0 or self.xi <= 0 or not 0 < self.delta < 1:
            raise InputError("sigma and xi must be positive and delta in (0,1)")
        if self.mode not in ("theory", "practical"):
            raise InputError(f"mode must be theory or practical, got {self.mode!r}")
        if self.mode == "theory" and self.xi != 1 / (4 * self.n):
            raise InputError("theory mode requires xi = 1/(4n)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TestParams":
        return cls(**data)

    def query_budget(self) -> int:
        """Upper bound on neighbor queries of one run."""
        return self.s * (self.batches + 1) * self.r * self.ell


def _check_inputs(n, d, k, epsilon, phi):
    if n < 1 or d < 1 or k < 1:
        raise InputError("n, d and k must be positive")
    if not 0 < epsilon <= 0.5:
        raise InputError(f"epsilon must lie in (0, 1/2], got {epsilon}")
    if phi <= 0:
        raise InputError(f"phi must be positive, got {phi}")


def theory_params(n: int, d: int, k: int, epsilon: float, phi: float, overrides: dict | None = None) -> TestParams:
    """Parameters from the worst-case analysis (huge; useful for feasibility reports)."""
    _check_inputs(n, d, k, epsilon, phi)
    c = {**THEORY_CONSTANTS, **(overrides or {})}
    s = math.ceil(1536 * k * math.log(8 * (k + 1)) / epsilon**2)
    ell = math.ceil(c["c_ell"] * k**4 * math.log2(n) / phi**2) if n > 1 else 1
    sigma = 192 * s * k / n
    r = math.ceil(192 * c["closeness_c"] * s * math.sqrt(s * k * n) * math.log(s))
    delta = 1 / (12 * s * s)
    return TestParams(n, k, s, max(ell, 1), sigma, r, 1 / (4 * n), delta,
                      median_batches(delta, c["c_median"]), "theory", c)


def practical_params(n: int, d: int, k: int, epsilon: float = 0.5, phi: float = 0.4,
                     overrides: dict | None = None, calibrated: bool = True) -> TestParams:
    """Desk-scale parameters with tunable constants.

    Constant precedence: ``overrides`` > shipped calibration file (when
    ``calibrated``) > declared defaults.
    """
    _check_inputs(n, d, k, epsilon, phi)
    c = dict(DECLARED_PRACTICAL)
    if calibrated:
        c.update(calibrated_constants())
    c.update(overrides or {})
    s = max(3 * (k + 1), math.ceil(c["c_s"] * k * math.log(8 * (k + 1))))
    ell = max(1, math.ceil(c["c_ell"] * math.log(n) / phi**2)) if n > 1 else 1
    r = max(2, math.ceil(c["c_r"] * math.sqrt(n * k) * math.log(s + 1)))
    sigma = c["c_sigma"] * s * k / n
    delta = 1 / (12 * s * s)
    return TestParams(n, k, s, ell, sigma, r, 1 / (4 * n), delta,
                      median_batches(delta, c["c_median"]), "practical", c)


# ---------------------------------------------------------------------------
# similarity graph


@dataclass
class SimilarityGraph:
    sample_vertices: list
    edges: list
    per_pair_verdicts: dict = field(default_factory=dict)

    def to_dict(self, verbose: bool = False) -> dict:
        out = {"sample_vertices": list(self.sample_vertices), "edges": [list(e) for e in self.edges]}
        if verbose:
            out["per_pair_verdicts"] = {f"{i},{j}": v.to_dict() for (i, j), v in self.per_pair_verdicts.items()}
        return out


def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def connected_components(h: SimilarityGraph) -> int:
    """Number of components among the sample slots (disjoint-set union)."""
    s = len(h.sample_vertices)
    parent = list(range(s))
    count = s
    for i, j in h.edges:
        a, b = _find(parent, i), _find(parent, j)
        if a != b:
            parent[a] = b
            count -= 1
    return count


@dataclass
class RunReport:
    verdict: str
    reject_reason: str | None
    component_count: int | None
    similarity: SimilarityGraph | None
    norm_verdicts: list
    seed: int
    params: TestParams
    queries: int
    wall_time: float
    oracle: bool = False

    @property
    def accepted(self) -> bool:
        return self.verdict == "accept"

    def to_dict(self, verbose: bool = False) -> dict:
        return {
            "verdict": self.verdict,
            "reject_reason": self.reject_reason,
            "component_count": self.component_count,
            "similarity": None if self.similarity is None else self.similarity.to_dict(verbose),
            "norm_statistics": [v.statistic for v in self.norm_verdicts],
            "norm_threshold": self.norm_verdicts[0].threshold if self.norm_verdicts else None,
            "seed": self.seed,
            "params": self.params.to_dict(),
            "queries": self.queries,
            "wall_time": self.wall_time,
            "oracle": self.oracle,
        }


def _check_params(g: BoundedDegreeGraph, params: TestParams) -> None:
    if params.n != g.n:
        raise InputError(f"params were built for n={params.n} but the graph has n={g.n}")
    if params.r > MAX_SAMPLES:
        raise CapacityError(f"r={params.r} exceeds the sample cap {MAX_SAMPLES}")


def sample_slots(g: BoundedDegreeGraph, params: TestParams, seed: int) -> np.ndarray:
    """The ``s`` uniformly sampled vertices (with replacement) of a run."""
    return np.random.default_rng(seed).integers(0, g.n, size=params.s)


def _assemble(S, params, seed, norm_verdicts, edges, pair_verdicts, queries, t0, oracle) -> RunReport:
    if any(not v.accepted for v in norm_verdicts):
        return RunReport("reject", "norm_screen", None, None, norm_verdicts, seed, params,
                         queries, time.perf_counter() - t0, oracle)
    H = SimilarityGraph(S.tolist(), edges, pair_verdicts)
    comps = connected_components(H)
    ok = comps <= params.k
    return RunReport("accept" if ok else "reject", None if ok else "components", comps, H,
                     norm_verdicts, seed, params, queries, time.perf_counter() - t0, oracle)


def k_cluster_test(g: BoundedDegreeGraph, params: TestParams, seed: int) -> RunReport:
    """One run of the sampled tester; deterministic in ``(g, params, seed)``."""
    _check_params(g, params)
    t0 = time.perf_counter()
    S = sample_slots(g, params, seed)
    s, r, m = params.s, params.r, params.batches
    slots = np.arange(s, dtype=np.int64)

    def batch(b):
        return walk_endpoints(g, S, params.ell, r, seed, (slots * (m + 1) + b) * r)

    ends, queries = batch(0)
    z = collision_counts(count_matrix(ends, g.n))
    thr = norm_threshold(r, params.sigma)
    norm_verdicts = [TesterVerdict(bool(zi < thr), float(zi), thr, r) for zi in z]
    if any(not v.accepted for v in norm_verdicts):
        return _assemble(S, params, seed, norm_verdicts, [], {}, queries, t0, False)

    est = np.empty((m, s, s))
    for b in range(1, m + 1):
        ends, q = batch(b)
        queries += q
        est[b - 1] = pairwise_distance_estimates(count_matrix(ends, g.n), r)
    med = np.median(est, axis=0)
    cthr = closeness_threshold(params.xi)
    edges, verdicts = [], {}
    for i in range(s):
        for j in range(i + 1, s):
            acc = bool(med[i, j] < cthr)
            verdicts[(i, j)] = TesterVerdict(acc, float(med[i, j]), cthr, r)
            if acc:
                edges.append((i, j))
    return _assemble(S, params, seed, norm_verdicts, edges, verdicts, queries, t0, False)


def oracle_cluster_test(g: BoundedDegreeGraph, params: TestParams, seed: int = 0) -> RunReport:
    """Same pipeline with exact walk distributions in place of samples.

    The sample is the one :func:`k_cluster_test` would draw for ``seed``.  The
    norm screen rejects iff ``||p||^2 >= sigma/2`` (the value at which the
    collision rule's expected statistic meets its threshold); a pair is
    joined iff ``||p_u - p_v||^2 <= 5/(8n)``.
    """
    _check_params(g, params)
    t0 = time.perf_counter()
    S = sample_slots(g, params, seed)
    uniq, inv = np.unique(S, return_inverse=True)
    P = exact_distributions(g, uniq, params.ell)[:, inv]
    norms = np.einsum("ij,ij->j", P, P)
    norm_verdicts = [TesterVerdict(bool(x < params.sigma / 2), float(x), params.sigma / 2, 0) for x in norms]
    if any(not v.accepted for v in norm_verdicts):
        return _assemble(S, params, seed, norm_verdicts, [], {}, 0, t0, True)
    D = norms[:, None] + norms[None, :] - 2 * (P.T @ P)
    thr = 5 / (8 * g.n)
    edges, verdicts = [], {}
    for i in range(params.s):
        for j in range(i + 1, params.s):
            acc = bool(D[i, j] <= thr)
            verdicts[(i, j)] = TesterVerdict(acc, float(D[i, j]), thr, 0)
            if acc:
                edges.append((i, j))
    return _assemble(S, params, seed, norm_verdicts, edges, verdicts, 0, t0, True)
