"""Seeded benchmark instances with planted ground truth.

Random regular pieces come from the pairing (configuration) model.  Rather
than redrawing the whole pairing until it is simple -- hopeless for
``d >= 6`` at useful sizes -- stubs that form loops or repeated edges are
returned to the pool and re-paired; if the pool stops shrinking the attempt
restarts from scratch.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InputError, ResampleError
from .graph import BoundedDegreeGraph, VertexSet, cut_size, parse_edgelist
from .spectral import lambda2

MAX_RETRIES = 100


def _rng(rng) -> tuple[np.random.Generator, int | None]:
    if isinstance(rng, np.random.Generator):
        return rng, None
    return np.random.default_rng(rng), int(rng)


def _pair_stubs(degrees: np.ndarray, rng: np.random.Generator, max_stall: int = 50) -> np.ndarray | None:
    """One attempt at a simple graph with the given degree sequence; ``None`` if stuck."""
    stubs = np.repeat(np.arange(len(degrees), dtype=np.int64), degrees)
    n = len(degrees)
    present: set[int] = set()
    edges: list[np.ndarray] = []
    stall = 0
    while len(stubs):
        rng.shuffle(stubs)
        a, b = stubs[0::2], stubs[1::2]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        key = lo * n + hi
        ok = lo != hi
        # reject pairs repeated within this round (keep the first occurrence)
        _, first = np.unique(key, return_index=True)
        firstmask = np.zeros(len(key), dtype=bool)
        firstmask[first] = True
        ok &= firstmask
        if present:
            ok &= ~np.isin(key, np.fromiter(present, dtype=np.int64, count=len(present)))
        if not ok.any():
            stall += 1
            if stall > max_stall:
                return None
            continue
        stall = 0
        present.update(key[ok].tolist())
        edges.append(np.stack([lo[ok], hi[ok]], axis=1))
        stubs = np.concatenate([a[~ok], b[~ok]])
    return np.concatenate(edges) if edges else np.zeros((0, 2), dtype=np.int64)


def random_graph_with_degrees(degrees: Sequence[int], d: int, rng, max_restarts: int = 1000) -> BoundedDegreeGraph:
    """Random simple graph with an exact degree sequence (degree bound ``d``)."""
    rng, _ = _rng(rng)
    degrees = np.asarray(degrees, dtype=np.int64)
    if degrees.sum() % 2:
        raise InputError("degree sum must be even")
    if np.any(degrees >= len(degrees)) or np.any(degrees < 0) or np.any(degrees > d):
        raise InputError("degree sequence not realizable within the bound")
    for _ in range(max_restarts):
        edges = _pair_stubs(degrees, rng)
        if edges is not None:
            order = np.lexsort((edges[:, 1], edges[:, 0]))
            return BoundedDegreeGraph.from_edges(len(degrees), d, edges[order].tolist())
    raise ResampleError("pairing model failed to produce a simple graph")


def random_regular_expander(m: int, d: int, rng, lambda2_floor: float | None = None,
                            degree_bound: int | None = None) -> BoundedDegreeGraph:
    """Random simple ``d``-regular graph on ``m`` vertices.

    With ``lambda2_floor`` set, graphs whose regularized-Laplacian ``lambda2``
    (normalized by ``degree_bound``, default ``d``) falls below the floor are
    resampled, up to :data:`MAX_RETRIES` times.
    """
    if m * d % 2:
        raise InputError(f"m*d must be even (m={m}, d={d})")
    if m < d + 1:
        raise InputError(f"need m >= d+1 (m={m}, d={d})")
    rng, _ = _rng(rng)
    bound = d if degree_bound is None else degree_bound
    for _ in range(MAX_RETRIES):
        g = random_graph_with_degrees(np.full(m, d), bound, rng)
        if lambda2_floor is None or lambda2(g) >= lambda2_floor:
            return g
    raise ResampleError(f"no {d}-regular graph on {m} vertices met lambda2 >= {lambda2_floor}")


# ---------------------------------------------------------------------------
# instances


def _frac_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


@dataclass
class ClusterInstance:
    graph: BoundedDegreeGraph
    parts: list
    design: dict = field(default_factory=dict)
    seed: int | None = None

    def labels(self) -> np.ndarray:
        lab = np.empty(self.graph.n, dtype=np.int64)
        for j, C in enumerate(self.parts):
            lab[list(C.members)] = j
        return lab

    def realized_phi_out(self) -> list[Fraction]:
        return [Fraction(cut_size(self.graph, C), self.graph.d * len(C)) for C in self.parts]

    def sidecar(self) -> dict:
        return {
            "n": self.graph.n,
            "d": self.graph.d,
            "parts": [list(C.members) for C in self.parts],
            "design": self.design,
            "seed": self.seed,
        }

    def save(self, stem: str | Path) -> tuple[Path, Path]:
        stem = Path(stem)
        edges, meta = stem.with_suffix(".edges"), stem.with_suffix(".json")
        edges.parent.mkdir(parents=True, exist_ok=True)
        edges.write_text(self.graph.to_edgelist())
        meta.write_text(json.dumps(self.sidecar(), indent=1, sort_keys=True) + "\n")
        return edges, meta

    @classmethod
    def load(cls, stem: str | Path) -> "ClusterInstance":
        stem = Path(stem)
        g = parse_edgelist(stem.with_suffix(".edges").read_text())
        meta = json.loads(stem.with_suffix(".json").read_text())
        parts = [VertexSet(g.n, tuple(p)) for p in meta["parts"]]
        return cls(g, parts, meta.get("design", {}), meta.get("seed"))


def _design(kind: str, g: BoundedDegreeGraph, parts, cross: int, lam2s, **extra) -> dict:
    phis = [Fraction(cut_size(g, C), g.d * len(C)) for C in parts]
    out = {
        "kind": kind,
        "k": len(parts),
        "d": g.d,
        "phi_out": [_frac_str(p) for p in phis],
        "phi_in_target": [None if lam is None else lam / 2 for lam in lam2s],
        "lambda2_parts": list(lam2s),
        "cross_edges": cross,
    }
    out.update(extra)
    return out


def _default_floor(inner_degree: int, d: int) -> float:
    # ~40% of the Alon-Boppana limit for the inner degree, expressed in the
    # regularized normalization of the host bound d
    ideal = 1 - 2 * math.sqrt(inner_degree - 1) / inner_degree if inner_degree > 2 else 0.0
    return 0.4 * ideal * inner_degree / d


def _build_parts(sizes, inner_degree, d, rng, floor):
    blocks, lam2s, offset = [], [], 0
    for size in sizes:
        g = random_regular_expander(size, inner_degree, rng, lambda2_floor=None, degree_bound=d)
        lam = lambda2(g) if size <= 4000 else None
        tries = 1
        while floor is not None and lam is not None and lam < floor:
            if tries >= MAX_RETRIES:
                raise ResampleError("part expander failed its lambda2 floor")
            g = random_regular_expander(size, inner_degree, rng, degree_bound=d)
            lam = lambda2(g)
            tries += 1
        blocks.append(g.edges + offset)
        lam2s.append(lam)
        offset += size
    return blocks, lam2s


def _ranges(sizes, n) -> list[VertexSet]:
    bounds = np.cumsum([0, *sizes])
    return [VertexSet(n, tuple(range(bounds[i], bounds[i + 1]))) for i in range(len(sizes))]


def planted_clusterable(sizes: Sequence[int], d: int, cross_edges: int, rng,
                        lambda2_floor: float | None = "auto") -> ClusterInstance:
    """Parts are ``(d-1)``-regular expanders; ``cross_edges`` join random part pairs.

    Each vertex keeps one free slot; a cross edge uses one free slot in each
    of two distinct, uniformly chosen parts.
    """
    rng, seed = _rng(rng)
    sizes = [int(x) for x in sizes]
    if len(sizes) < 1 or any(sz < d for sz in sizes):
        raise InputError(f"every part needs size >= d (d={d}): {sizes}")
    if any(sz * (d - 1) % 2 for sz in sizes):
        raise InputError(f"size*(d-1) must be even for every part: sizes={sizes}, d={d}")
    if cross_edges < 0 or (cross_edges > 0 and len(sizes) < 2) or 2 * cross_edges > sum(sizes):
        raise InputError(f"cross_edges={cross_edges} exceeds the free slots")
    floor = _default_floor(d - 1, d) if lambda2_floor == "auto" else lambda2_floor
    n = sum(sizes)
    blocks, lam2s = _build_parts(sizes, d - 1, d, rng, floor)
    parts = _ranges(sizes, n)
    free = [list(rng.permutation(C.members)) for C in parts]
    h = len(sizes)
    cross = []
    for _ in range(cross_edges):
        a, b = rng.choice(h, size=2, replace=False)
        if not free[a] or not free[b]:
            raise InputError(f"cross_edges={cross_edges} exceeds the free slots of a part")
        u, v = int(free[a].pop()), int(free[b].pop())
        cross.append((min(u, v), max(u, v)))
    edges = np.concatenate(blocks + [np.array(cross, dtype=np.int64).reshape(-1, 2)])
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    g = BoundedDegreeGraph.from_edges(n, d, edges.tolist())
    return ClusterInstance(g, parts, _design("planted", g, parts, cross_edges, lam2s), seed)


def far_instance_disjoint(k_plus: int, size: int, d: int, rng,
                          lambda2_floor: float | None = "auto") -> ClusterInstance:
    """Disjoint union of ``k_plus`` equal ``d``-regular expanders."""
    if k_plus < 2:
        raise InputError(f"k_plus must be >= 2, got {k_plus}")
    rng, seed = _rng(rng)
    floor = _default_floor(d, d) if lambda2_floor == "auto" else lambda2_floor
    sizes = [size] * k_plus
    blocks, lam2s = _build_parts(sizes, d, d, rng, floor)
    n = size * k_plus
    edges = np.concatenate(blocks)
    g = BoundedDegreeGraph.from_edges(n, d, edges.tolist())
    parts = _ranges(sizes, n)
    return ClusterInstance(g, parts, _design("far_disjoint", g, parts, 0, lam2s), seed)


def dumbbell(half: int, d: int, cut_edges: int, rng,
             lambda2_floor: float | None = "auto") -> ClusterInstance:
    """Two ``(d-1)``-regular expanders of size ``half`` joined by a matching of ``cut_edges`` edges."""
    if cut_edges < 0 or cut_edges > half:
        raise InputError(f"need 0 <= cut_edges <= half (got {cut_edges}, half={half})")
    if Fraction(cut_edges, d * half) > Fraction(1, 4 * d):
        raise InputError(f"cut_edges={cut_edges} gives outer conductance above 1/(4d)")
    rng, seed = _rng(rng)
    floor = _default_floor(d - 1, d) if lambda2_floor == "auto" else lambda2_floor
    blocks, lam2s = _build_parts([half, half], d - 1, d, rng, floor)
    left = rng.choice(half, size=cut_edges, replace=False)
    right = rng.choice(half, size=cut_edges, replace=False) + half
    cross = np.stack([left, right], axis=1).astype(np.int64)
    edges = np.concatenate(blocks + [cross])
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    g = BoundedDegreeGraph.from_edges(2 * half, d, edges.tolist())
    parts = _ranges([half, half], 2 * half)
    return ClusterInstance(g, parts, _design("dumbbell", g, parts, cut_edges, lam2s), seed)


def low_conductance_family(kind: str, n: int, rng=None) -> BoundedDegreeGraph:
    """Path, cycle, or square grid on ``n`` vertices (deterministic; ``rng`` unused)."""
    if n < 3:
        raise InputError(f"need n >= 3, got {n}")
    if kind == "path":
        edges = [(i, i + 1) for i in range(n - 1)]
    elif kind == "cycle":
        edges = [(i, i + 1) for i in range(n - 1)] + [(0, n - 1)]
    elif kind == "grid":
        side = math.isqrt(n)
        if side * side != n:
            raise InputError(f"grid needs a perfect-square n, got {n}")
        edges = []
        for r in range(side):
            for c in range(side):
                v = r * side + c
                if c + 1 < side:
                    edges.append((v, v + 1))
                if r + 1 < side:
                    edges.append((v, v + side))
    else:
        raise InputError(f"unknown family {kind!r}; expected path, cycle or grid")
    deg = np.bincount(np.asarray(edges).ravel(), minlength=n)
    return BoundedDegreeGraph.from_edges(n, int(deg.max()), edges)
