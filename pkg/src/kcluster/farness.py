"""Constructive machinery behind farness: pair selection, expander repair,
sparse-cut extraction and iterated partition refinement.

Choices left open by the construction ("an arbitrary subset", "an arbitrary
perfect matching") are resolved by smallest vertex id so every run is
reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConstructionError, InputError, ResampleError
from .generators import MAX_RETRIES, random_graph_with_degrees
from .graph import (
    BoundedDegreeGraph,
    VertexSet,
    _as_vertex_set,
    cut_size,
    induced_subgraph,
    min_conductance_cut,
)
from .spectral import lambda2, sweep_cut

#: Default proximity parameter for the farness constructions.
DEFAULT_EPSILON = 0.3
#: Conductance floor certified (via lambda2/2) for the degree-3 expander on A'.
C_EXP = 0.02
#: Default largest conductance at which iterative_partition still splits a part.
DEFAULT_SPLIT_CONDUCTANCE = 0.05


def max_removable(n: int, epsilon: float) -> int:
    """Largest ``|A|`` allowed by the precondition ``|A| <= ceil(eps n / 9)``."""
    return math.ceil(epsilon * n / 9)


@dataclass(frozen=True)
class PairSet:
    """Vertex-disjoint pairs ``(u, v)`` with ``u <= v``; ``u == v`` is a self-pair."""

    pairs: tuple
    pool: tuple = ()

    def __post_init__(self):
        seen = set()
        for u, v in self.pairs:
            if u > v:
                raise InputError(f"pair ({u},{v}) is not ordered")
            for x in {u, v}:
                if x in seen:
                    raise InputError(f"vertex {x} appears in two pairs")
                seen.add(x)

    def __len__(self) -> int:
        return len(self.pairs)

    def slots(self) -> list[int]:
        """Matching slots: each pair contributes both entries (a self-pair twice)."""
        return [x for pair in self.pairs for x in pair]


def construct_s(g: BoundedDegreeGraph, A, epsilon: float = DEFAULT_EPSILON) -> PairSet:
    """Low-degree self-pairs plus a greedy edge matching outside ``A``.

    Returns ``ceil(|A|/4)`` pairs chosen by smallest ids; ``pool`` holds the
    full candidate set.  For ``d >= 3`` the candidate set is checked to hold
    at least ``n/6`` pairs.
    """
    A = _as_vertex_set(g, A)
    if len(A) > max_removable(g.n, epsilon):
        raise InputError(f"|A|={len(A)} exceeds ceil(eps*n/9)={max_removable(g.n, epsilon)}")
    d = g.d
    outside = [v for v in range(g.n) if v not in A]
    low = [v for v in outside if g.degree(v) <= d - 2]
    pool = [(v, v) for v in low]
    in_u = np.zeros(g.n, dtype=bool)
    in_u[[v for v in outside if g.degree(v) > d - 2]] = True
    # one ascending pass equals repeatedly taking the smallest v that still has
    # a neighbour in U: U only shrinks, so skipped vertices stay unmatched
    for v in range(g.n):
        if not in_u[v]:
            continue
        nbrs = [u for u in g.adjacency[v] if in_u[u]]
        if nbrs:
            u = min(nbrs)
            pool.append((min(u, v), max(u, v)))
            in_u[u] = in_u[v] = False
    pool.sort()
    need = math.ceil(len(A) / 4)
    if d >= 3 and 6 * len(pool) < g.n:
        raise ConstructionError(f"candidate pair set has {len(pool)} < n/6 pairs")
    if len(pool) < need:
        raise ConstructionError(f"only {len(pool)} candidate pairs, need {need}")
    return PairSet(tuple(pool[:need]), tuple(pool))


@dataclass
class RepairResult:
    graph: BoundedDegreeGraph
    pairs: PairSet
    removed: int
    added: int
    a_double: tuple
    c_exp_certified: float | None = None

    @property
    def edits(self) -> int:
        return self.removed + self.added


def _certified_cubic(m: int, rng, floor: float) -> tuple[list, float]:
    """Random graph on ``m`` vertices with degrees 3 (one 2 when ``m`` is odd), ``lambda2/2 >= floor``."""
    degrees = [3] * m
    if m % 2:
        degrees[-1] = 2
    for _ in range(MAX_RETRIES):
        h = random_graph_with_degrees(degrees, 3, rng)
        cert = lambda2(h) / 2
        if cert >= floor:
            return h.edges.tolist(), cert
    raise ResampleError(f"no degree-3 graph on {m} vertices reached conductance certificate {floor}")


def repair_to_expander(g: BoundedDegreeGraph, A, rng, epsilon: float = DEFAULT_EPSILON,
                       c_exp: float = C_EXP) -> RepairResult:
    """Rewire ``G`` around ``A`` into a graph that expands, within ``(d+4)|A|`` edits.

    Edges at ``A`` and inside the selected pairs are deleted; a sparse
    expander-like graph is put on ``A`` and the degree-2 vertices ``A''`` of
    it are matched to the pair slots outside ``A``.
    """
    A = _as_vertex_set(g, A)
    if g.d < 3:
        raise InputError("repair needs d >= 3")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    a = list(A.members)
    pairs = construct_s(g, A, epsilon)
    size = len(a)
    cert = None
    if size == 0:
        return RepairResult(g, pairs, 0, 0, (), None)
    n2 = 2 * math.ceil(size / 4)
    # the near-cubic graph on A' has floor(3|A'|/2) edges; it must have one
    # edge per A'' vertex (fails only for |A| = 13), else fall back to a path
    if size == 1:
        a2, star = a, []
    elif size < 10 or 3 * (size - n2) // 2 < n2:
        a2 = a[:n2]
        star = [(a[i], a[i + 1]) for i in range(size - 1)]
    else:
        a2, a1 = a[:n2], a[n2:]
        local, cert = _certified_cubic(len(a1), rng, c_exp)
        if len(local) < n2:
            raise ConstructionError("expander on A' has fewer edges than |A''|")
        star = []
        for idx, (x, y) in enumerate(local):
            x, y = a1[x], a1[y]
            if idx < n2:
                w = a2[idx]
                star += [(x, w), (y, w)]
            else:
                star.append((x, y))

    old = {tuple(e) for e in g.edges.tolist()}
    in_a = A.mask
    pair_edges = {(u, v) for u, v in pairs.pairs if u != v}
    keep = {e for e in old if not (in_a[e[0]] or in_a[e[1]]) and e not in pair_edges}
    new = set(keep)
    slots = pairs.slots()
    if size == 1:
        (u, v), = pairs.pairs
        match = [(a[0], u)] if u == v else [(a[0], u), (a[0], v)]
    else:
        match = list(zip(a2, slots))
    for x, y in match + star:
        new.add((min(x, y), max(x, y)))
    H = BoundedDegreeGraph.from_edges(g.n, g.d, sorted(new))
    removed, added = len(old - new), len(new - old)
    if removed + added > (g.d + 4) * size:
        raise ConstructionError(f"{removed + added} edits exceed (d+4)|A|={(g.d + 4) * size}")
    return RepairResult(H, pairs, removed, added, tuple(a2), cert)


def repair_alpha(g: BoundedDegreeGraph, A, c_exp: float = C_EXP) -> Fraction:
    """Largest ``alpha`` for which the repair preconditions hold on ``(G, A)``.

    ``alpha <= c_exp / (150 d)`` and ``phi(G[V - A]) >= (350 / c_exp) alpha``.
    Exact inner conductance, so ``n - |A| <= 24``.
    """
    A = _as_vertex_set(g, A)
    rest = A.complement()
    c_exp_q = Fraction(c_exp).limit_denominator(10**6)
    inner = min_conductance_cut(induced_subgraph(g, rest)[0])[0] if len(rest) else Fraction(0)
    return min(c_exp_q / (150 * g.d), inner * c_exp_q / 350)


# ---------------------------------------------------------------------------
# cuts and partitions


def sparse_cut_search(g: BoundedDegreeGraph, mode: str = "sweep", min_size: int = 1) -> tuple[VertexSet, Fraction]:
    """Low-conductance set with ``|S| <= n/2``.

    ``exact`` enumerates all subsets (n <= 24); ``sweep`` returns the smallest
    connected component when the graph is disconnected and otherwise the best
    threshold cut along the second eigenvector.
    """
    if g.n < 2:
        raise InputError("cut search needs at least two vertices")
    if mode == "exact":
        phi, S = min_conductance_cut(g)
        return S, phi
    if mode != "sweep":
        raise InputError(f"mode must be exact or sweep, got {mode!r}")
    ncomp, labels = g.component_labels()
    if ncomp > 1:
        sizes = np.bincount(labels)
        ok = np.flatnonzero(sizes >= min_size)
        if len(ok):
            c = int(ok[np.argmin(sizes[ok])])
            S = VertexSet.from_mask(labels == c)
            if 2 * len(S) <= g.n:
                return S, Fraction(0)
    return sweep_cut(g, min_size=min_size)


@dataclass
class PartitionCertificate:
    parts: list
    conductances: list
    min_part_size: int
    cut_total: int
    size_floor: float
    split_conductance: float
    succeeded: bool
    checks: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "parts": [list(p.members) for p in self.parts],
            "conductances": [str(c) for c in self.conductances],
            "min_part_size": self.min_part_size,
            "cut_total": self.cut_total,
            "size_floor": self.size_floor,
            "split_conductance": self.split_conductance,
            "succeeded": self.succeeded,
            "checks": self.checks,
        }


def cut_total(g: BoundedDegreeGraph, parts) -> int:
    """``e(V_1, ..., V_h)``: edges whose endpoints lie in different parts."""
    lab = np.empty(g.n, dtype=np.int64)
    for j, P in enumerate(parts):
        lab[list(P.members)] = j
    e = g.edges
    return int(np.count_nonzero(lab[e[:, 0]] != lab[e[:, 1]])) if len(e) else 0


def iterative_partition(g: BoundedDegreeGraph, k: int, epsilon: float = DEFAULT_EPSILON,
                        max_split_conductance: float = DEFAULT_SPLIT_CONDUCTANCE) -> PartitionCertificate:
    """Refine ``{V}`` by cheapest sparse cuts until ``k+1`` parts or no admissible split.

    A split of part ``P`` into ``A, P - A`` is admissible when the smaller
    side has at least ``eps^2 n / (1152 k)`` vertices and conductance at most
    ``max_split_conductance`` inside ``G[P]``.
    """
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    n = g.n
    floor = epsilon**2 * n / (1152 * k)
    min_size = max(1, math.ceil(floor))
    tau = Fraction(max_split_conductance).limit_denominator(10**9)
    parts = [VertexSet(n, tuple(range(n)))]
    while len(parts) < k + 1:
        best = None
        for j, P in enumerate(parts):
            if len(P) < 2 * min_size:
                continue
            sub, ids = induced_subgraph(g, P)
            S, phi = sparse_cut_search(sub, "sweep", min_size=min_size)
            if phi <= tau and (best is None or phi < best[0]):
                best = (phi, j, [ids[i] for i in S.members])
        if best is None:
            break
        _, j, side = best
        P = parts.pop(j)
        A = VertexSet.of(n, side)
        rest = VertexSet.of(n, set(P.members) - set(side))
        parts[j:j] = [A, rest]
    conds = [Fraction(cut_size(g, P), g.d * len(P)) if len(P) < n else Fraction(0) for P in parts]
    total = cut_total(g, parts)
    h = len(parts)
    checks = {
        "sizes": all(len(P) >= floor for P in parts),
        "cut_budget": total <= (h - 1) * float(tau) * g.d * n,
        "conductance_budget": all(float(c) <= k * float(tau) * n / len(P) for c, P in zip(conds, parts)),
        "disjoint_cover": sum(len(P) for P in parts) == n and len(set().union(*[set(P.members) for P in parts])) == n,
    }
    return PartitionCertificate(parts, conds, min(len(P) for P in parts), total, floor,
                                float(max_split_conductance), h == k + 1, checks)
