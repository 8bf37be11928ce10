"""Dense spectral oracles on the regularized Laplacian ``L = (diag(deg) - A) / d``.

``L`` is the Laplacian of the implicitly ``d``-regular view in which every
vertex carries a self-loop of weight ``d - deg(v)``; the lazy-walk operator
is ``W = I - L/2``.  Everything here is desk-scale (dense) and meant to
check the quantities the sublinear tester relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numba
import numpy as np
import scipy.linalg
from scipy.sparse import diags
from scipy.sparse.linalg import eigsh

from .errors import CapacityError, InputError
from .graph import (
    BoundedDegreeGraph,
    VertexSet,
    _as_vertex_set,
    all_cut_sizes,
    induced_subgraph,
    min_conductance_bruteforce,
)
from .walks import exact_distribution, exact_distributions, remain_probabilities

#: Vertex cap for the dense symmetric eigensolver.
EIGEN_CAP = 4000
#: Vertex cap for the exhaustive multi-set conductance profile.
RHO_CAP = 12
#: Absolute tolerance asserted for eigen identities.
SPECTRAL_TOL = 1e-8
#: Slack used when comparing floating eigenvalues against exact rationals.
COMPARE_SLACK = 1e-9


def _check_dense(g: BoundedDegreeGraph) -> None:
    if g.n > EIGEN_CAP:
        raise CapacityError(f"dense eigensolve limited to n <= {EIGEN_CAP} (got {g.n})")


def regularized_laplacian(g: BoundedDegreeGraph) -> np.ndarray:
    A = g.adjacency_matrix.toarray()
    return (np.diag(g.degrees.astype(float)) - A) / g.d


def sparse_laplacian(g: BoundedDegreeGraph):
    return ((diags(g.degrees.astype(float)) - g.adjacency_matrix) / g.d).tocsr()


@dataclass
class SpectralReport:
    """Ascending spectrum and orthonormal eigenvectors (column ``i`` <-> ``eigenvalues[i]``)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: dict = field(default_factory=dict)

    @property
    def walk_eigenvalues(self) -> np.ndarray:
        return 1.0 - self.eigenvalues / 2.0

    def zero_multiplicity(self, tol: float = SPECTRAL_TOL) -> int:
        return int(np.count_nonzero(self.eigenvalues < tol))

    def to_dict(self, with_vectors: bool = False) -> dict:
        out = {"eigenvalues": self.eigenvalues.tolist(), "residuals": self.residuals}
        if with_vectors:
            out["eigenvectors"] = self.eigenvectors.tolist()
        return out


def eigensolve(g: BoundedDegreeGraph) -> SpectralReport:
    """Full spectrum of the regularized Laplacian with residual diagnostics."""
    _check_dense(g)
    L = regularized_laplacian(g)
    vals, vecs = scipy.linalg.eigh(L)
    eig_res = np.linalg.norm(L @ vecs - vecs * vals, axis=0)
    gram = vecs.T @ vecs
    ortho = np.abs(gram - np.eye(g.n)).max()
    residuals = {"eigen_residual_max": float(eig_res.max()), "orthonormality_max": float(ortho)}
    return SpectralReport(vals, vecs, residuals)


def smallest_eigenpairs(g: BoundedDegreeGraph, count: int) -> tuple[np.ndarray, np.ndarray]:
    """The ``count`` smallest eigenpairs; dense below the cap, Lanczos above it."""
    count = min(count, g.n)
    if g.n <= EIGEN_CAP:
        return scipy.linalg.eigh(regularized_laplacian(g), subset_by_index=[0, count - 1])
    if count >= g.n - 1:
        raise CapacityError("full spectrum above the dense cap")
    # shift-free Lanczos on 2I - L (largest eigenvalues of a PSD operator converge fastest)
    M = 2.0 * diags(np.ones(g.n)) - sparse_laplacian(g)
    v0 = np.random.default_rng(0).standard_normal(g.n)
    vals, vecs = eigsh(M, k=count, which="LA", v0=v0, tol=1e-10)
    order = np.argsort(-vals)
    return 2.0 - vals[order], vecs[:, order]


def lambda2(g: BoundedDegreeGraph) -> float:
    """Second-smallest eigenvalue of the regularized Laplacian (0 for a singleton)."""
    if g.n == 1:
        return 0.0
    vals, _ = smallest_eigenpairs(g, 2)
    return float(max(vals[1], 0.0))


def verify_spectral_facts(
    g: BoundedDegreeGraph, report: SpectralReport, v: int, t: int, tol: float = SPECTRAL_TOL
) -> dict:
    """Residuals of the eigen-expansion identities at vertex ``v``.

    * indicator expansion ``1_v = sum_i V[v,i] V[:,i]``
    * unit row norm ``sum_i V[v,i]^2 = 1``
    * ``p_v^t = sum_i V[v,i] (1 - lambda_i/2)^t V[:,i]`` against the
      matrix-power oracle.
    """
    V, lam = report.eigenvectors, report.eigenvalues
    e = np.zeros(g.n)
    e[v] = 1.0
    indicator = float(np.abs(V @ V[v] - e).max())
    row = float(abs(V[v] @ V[v] - 1.0))
    spectral_p = V @ (V[v] * (1.0 - lam / 2.0) ** t)
    walk = float(np.abs(spectral_p - exact_distribution(g, v, t).probs).max())
    res = {"indicator_expansion": indicator, "row_norm": row, "walk_expansion": walk}
    res["holds"] = all(x <= tol for x in res.values())
    res["tol"] = tol
    return res


# ---------------------------------------------------------------------------
# cuts


def sweep_cut(g: BoundedDegreeGraph, vector: np.ndarray | None = None,
              min_size: int = 1) -> tuple[VertexSet, Fraction]:
    """Best threshold cut along ``vector`` (default: second eigenvector).

    Every prefix of the sorted order is scored by the conductance of its
    smaller side; the returned set is that smaller side.  Prefixes whose
    smaller side has fewer than ``min_size`` vertices are skipped.
    """
    if g.n < 2:
        raise InputError("sweep cut needs at least two vertices")
    if vector is None:
        _, vecs = smallest_eigenpairs(g, 2)
        vector = vecs[:, 1]
    order = np.argsort(vector, kind="stable")
    pos = np.empty(g.n, dtype=np.int64)
    pos[order] = np.arange(g.n)
    # edge (a, b) is cut by prefixes of length i with min(pos) < i <= max(pos)
    diff = np.zeros(g.n + 1, dtype=np.int64)
    e = g.edges
    if len(e):
        lo = np.minimum(pos[e[:, 0]], pos[e[:, 1]]) + 1
        hi = np.maximum(pos[e[:, 0]], pos[e[:, 1]]) + 1
        np.add.at(diff, lo, 1)
        np.add.at(diff, hi, -1)
    cuts = np.cumsum(diff)[1 : g.n]  # prefix sizes 1..n-1
    sizes = np.arange(1, g.n)
    small = np.minimum(sizes, g.n - sizes)
    allowed = np.flatnonzero(small >= max(min_size, 1))
    if len(allowed) == 0:
        raise InputError(f"no sweep prefix has a side of at least {min_size} vertices")
    # exact argmin of cut/small via cross-multiplication
    best = int(allowed[0])
    for i in allowed[1:]:
        if cuts[i] * small[best] < cuts[best] * small[i]:
            best = int(i)
    i = best + 1
    members = order[:i] if i <= g.n - i else order[i:]
    S = VertexSet.of(g.n, members.tolist())
    return S, Fraction(int(cuts[best]), g.d * len(S))


@dataclass(frozen=True)
class CheegerResult:
    lambda2: float | None
    phi: Fraction
    exact: bool
    holds: bool

    def to_dict(self) -> dict:
        return {"lambda2": self.lambda2, "phi": str(self.phi), "exact": self.exact, "holds": self.holds}


def cheeger_check(g: BoundedDegreeGraph) -> CheegerResult:
    """Check ``lambda2/2 <= phi <= sqrt(2 lambda2)``.

    With ``n <= 24`` ``phi`` is exact; otherwise the sweep cut stands in for
    ``phi`` and only ``lambda2/2 <= phi_sweep`` (plus the constructive upper
    bound on the sweep) is checked.  The singleton passes vacuously.
    """
    if g.n == 1:
        return CheegerResult(None, Fraction(1, g.d), True, True)
    lam2 = lambda2(g)
    if g.n <= 24:
        phi = min_conductance_bruteforce(g)
        holds = lam2 / 2 <= float(phi) + COMPARE_SLACK and float(phi) <= math.sqrt(2 * lam2) + COMPARE_SLACK
        return CheegerResult(lam2, phi, True, holds)
    _, phi = sweep_cut(g)
    holds = lam2 / 2 <= float(phi) + COMPARE_SLACK and float(phi) <= math.sqrt(2 * lam2) + COMPARE_SLACK
    return CheegerResult(lam2, phi, False, holds)


@numba.njit(cache=True)
def _rho_dp(cuts, n, k, d):
    full = (1 << n) - 1
    size = np.zeros(full + 1, dtype=np.int64)
    for m in range(1, full + 1):
        size[m] = size[m >> 1] + (m & 1)
    phi = np.empty(full + 1)
    phi[0] = np.inf
    for m in range(1, full + 1):
        phi[m] = cuts[m] / (d * size[m])
    # cur[U] = best max-conductance using j disjoint non-empty subsets of U
    cur = phi.copy()
    for U in range(1, full + 1):  # j = 1: best single subset of U
        sub = (U - 1) & U
        while sub:
            if phi[sub] < cur[U]:
                cur[U] = phi[sub]
            sub = (sub - 1) & U
    for _ in range(2, k + 1):
        nxt = np.full(full + 1, np.inf)
        for U in range(1, full + 1):
            sub = U
            while sub:
                rest = U ^ sub
                val = max(phi[sub], cur[rest]) if rest else np.inf
                if val < nxt[U]:
                    nxt[U] = val
                sub = (sub - 1) & U
        cur = nxt
    return cur[full], phi


def rho_k_bruteforce(g: BoundedDegreeGraph, k: int) -> Fraction:
    """``min over k disjoint non-empty S_i of max_i phi_G(S_i)`` (n <= 12)."""
    if g.n > RHO_CAP:
        raise CapacityError(f"exhaustive multi-set conductance limited to n <= {RHO_CAP}")
    if not 1 <= k <= g.n:
        raise InputError(f"need 1 <= k <= n, got k={k}")
    cuts = all_cut_sizes(g, RHO_CAP)
    best, phi = _rho_dp(cuts, g.n, k, g.d)
    # recover the exact rational: the optimum equals some phi(S)
    masks = np.flatnonzero(phi == best)
    m = int(masks[0])
    return Fraction(int(cuts[m]), g.d * bin(m).count("1"))


# ---------------------------------------------------------------------------
# instance-level checks


def _graph_parts(inst) -> tuple[BoundedDegreeGraph, list[VertexSet]]:
    return inst.graph, list(inst.parts)


def eigengap_report(inst) -> dict:
    """Check ``lambda_i <= 2 max phi_out`` for ``i <= h`` and report the gap after ``h``."""
    g, parts = _graph_parts(inst)
    _check_dense(g)
    h = len(parts)
    phi_out = max(Fraction(x) for x in inst.design["phi_out"])
    vals, _ = smallest_eigenpairs(g, min(h + 1, g.n))
    bound = 2 * float(phi_out)
    holds = bool(np.all(vals[:h] <= bound + COMPARE_SLACK))
    lam_h = float(vals[h - 1])
    lam_next = float(vals[h]) if len(vals) > h else None
    return {
        "h": h,
        "eigenvalues": vals.tolist(),
        "bound": bound,
        "holds": holds,
        "lambda_h": lam_h,
        "lambda_h_plus_1": lam_next,
        "gap_ratio": None if lam_next is None else lam_next / max(lam_h, 1e-12),
    }


def eigenvector_spread(vectors: np.ndarray, C, i: int) -> float:
    """``(1/|C|) sum_{u,v in C} (f_u - f_v)^2`` for ``f = vectors[:, i]`` (ordered pairs).

    Evaluated as ``2 * sum_{u in C} (f_u - mean_C f)^2``.
    """
    members = np.asarray(list(C.members if isinstance(C, VertexSet) else C), dtype=np.int64)
    f = vectors[members, i]
    return float(2.0 * np.sum((f - f.mean()) ** 2))


def spread_bound_check(inst, report: SpectralReport | None = None) -> dict:
    """Compare each part's spread of ``v_1..v_h`` with ``8 d^4 phi_out / phi_in^2``.

    ``phi_in`` is certified from below by ``lambda2(G[C]) / 2``.
    """
    g, parts = _graph_parts(inst)
    h = len(parts)
    if report is None:
        _, vecs = smallest_eigenpairs(g, h)
    else:
        vecs = report.eigenvectors[:, :h]
    rows = []
    for j, C in enumerate(parts):
        sub, _ = induced_subgraph(g, C)
        phi_in = lambda2(sub) / 2
        phi_out = float(Fraction(inst.design["phi_out"][j]))
        bound = 8 * g.d**4 * phi_out / phi_in**2 if phi_in > 0 else math.inf
        spreads = [eigenvector_spread(vecs, C, i) for i in range(h)]
        rows.append({"part": j, "phi_in_lower": phi_in, "bound": bound, "spreads": spreads,
                     "holds": all(s <= bound + SPECTRAL_TOL for s in spreads)})
    return {"parts": rows, "holds": all(r["holds"] for r in rows)}


def tightness_potential(inst) -> dict:
    """Max over the two parts of the potential of ``v_2`` versus ``phi_out / (24 d^3)``."""
    g, parts = _graph_parts(inst)
    if len(parts) != 2:
        raise InputError("tightness check needs exactly two parts")
    _, vecs = smallest_eigenpairs(g, 2)
    pots = [eigenvector_spread(vecs, C, 1) for C in parts]
    phi_out = max(float(Fraction(x)) for x in inst.design["phi_out"])
    bound = phi_out / (24 * g.d**3)
    return {"potentials": pots, "max_potential": max(pots), "bound": bound,
            "phi_out": phi_out, "holds": max(pots) >= bound}


def within_cluster_distance_audit(
    inst,
    t: int,
    s: int | None = None,
    k: int | None = None,
    max_per_part: int = 200,
    alpha_cross: float = 0.5,
    seed: int = 0,
) -> dict:
    """Exact-distribution audit of within-part closeness, norms, and cross-part separation.

    For each part, up to ``max_per_part`` vertices are audited (all of them for
    small parts).  Reported per part and in aggregate:

    * fraction of audited within-part pairs with ``||p_u - p_v||^2 <= 1/(4n)``
      and the fraction of audited vertices all of whose within-part distances
      meet that bound;
    * fraction of audited vertices with ``||p_u||^2 <= 2k/(alpha n)``, where
      ``alpha = 1/(24 s)``;
    * across parts, the fraction of audited pairs with ``||p_u - p_v||^2 >= 1/n``
      among vertices whose probability of staying in their own part for ``t``
      steps is at least ``1 - t phi_out / (2 alpha_cross)``.  The
      ``in_window`` flag records whether ``t <= alpha_cross / (2 phi_out)``,
      the range in which that floor is guaranteed.
    """
    g, parts = _graph_parts(inst)
    n = g.n
    k = len(parts) if k is None else k
    if s is None:
        from .cluster import practical_params  # deferred: cluster imports this module

        s = practical_params(n, g.d, k).s
    alpha = 1.0 / (24 * s)
    rng = np.random.default_rng(seed)
    audited = []
    for C in parts:
        mem = np.asarray(C.members, dtype=np.int64)
        if len(mem) > max_per_part:
            mem = np.sort(rng.choice(mem, size=max_per_part, replace=False))
        audited.append(mem)
    allv = np.concatenate(audited)
    P = exact_distributions(g, allv, t)
    norms = np.einsum("ij,ij->j", P, P)
    gram = P.T @ P
    dist = norms[:, None] + norms[None, :] - 2 * gram
    offsets = np.cumsum([0] + [len(a) for a in audited])
    within_thr, cross_thr, norm_thr = 1 / (4 * n), 1 / n, 2 * k / (alpha * n)

    rows = []
    high = []
    for j, C in enumerate(parts):
        lo, hi = offsets[j], offsets[j + 1]
        D = dist[lo:hi, lo:hi]
        m = hi - lo
        iu = np.triu_indices(m, 1)
        ok = D <= within_thr
        pair_frac = float(ok[iu].mean()) if m > 1 else 1.0
        vertex_frac = float(ok.all(axis=1).mean())
        phi_out = float(Fraction(inst.design["phi_out"][j]))
        remain = remain_probabilities(g, C, t)[audited[j]]
        floor = 1 - t * phi_out / (2 * alpha_cross)
        hmask = remain >= floor - 1e-12
        high.append(np.arange(lo, hi)[hmask])
        rows.append({
            "part": j,
            "audited": int(m),
            "within_pair_fraction": pair_frac,
            "ctilde_density": vertex_frac,
            "norm_fraction": float((norms[lo:hi] <= norm_thr).mean()),
            "remain_floor": floor,
            "high_remain_count": int(hmask.sum()),
            "in_window": bool(phi_out == 0 or t <= alpha_cross / (2 * phi_out)),
        })
    cross_total = cross_ok = 0
    for a in range(len(parts)):
        for b in range(a + 1, len(parts)):
            D = dist[np.ix_(high[a], high[b])]
            cross_total += D.size
            cross_ok += int(np.count_nonzero(D >= cross_thr))
    n_pairs = sum(len(a) * (len(a) - 1) // 2 for a in audited)
    within_ok = sum(
        int(np.count_nonzero(np.triu(dist[offsets[j]:offsets[j + 1], offsets[j]:offsets[j + 1]] <= within_thr, 1)))
        for j in range(len(parts))
    )
    return {
        "t": t,
        "n": n,
        "alpha": alpha,
        "thresholds": {"within": within_thr, "cross": cross_thr, "norm": norm_thr},
        "parts": rows,
        "within_pair_fraction": within_ok / n_pairs if n_pairs else 1.0,
        "norm_fraction": float((norms <= norm_thr).mean()),
        "cross_pairs": cross_total,
        "cross_fraction": cross_ok / cross_total if cross_total else 1.0,
        "in_window": all(r["in_window"] for r in rows),
    }
