"""Lazy random walks: sampled endpoints and exact endpoint distributions.

The walk moves from ``v`` along each incident edge with probability
``1/(2d)`` and stays put otherwise.  Sampling uses a counter-based
generator keyed by ``(seed, start vertex, walk index, step)`` so every
endpoint is a pure function of those four values: results do not depend on
batching, ordering, or the number of workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numba
import numpy as np
from numba import uint64

from .errors import CapacityError, InputError
from .graph import BoundedDegreeGraph, CountingOracle, VertexSet, _as_vertex_set

#: Vertex cap for dense exact distributions.
EXACT_CAP = 100_000
#: The step draw multiplies a 53-bit value by 2d; keep the product in 64 bits.
MAX_WALK_DEGREE = 1024

_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_WALK_MUL = 0xD1B54A32D192ED03


# ---------------------------------------------------------------------------
# counter-based generator


def mix64(z: int) -> int:
    """splitmix64 finalizer on Python ints (reference for the compiled kernel)."""
    z &= _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


class CounterRNG:
    """Stateless generator: each draw is a hash of its coordinates."""

    def __init__(self, seed: int):
        if seed < 0:
            raise InputError(f"seed must be non-negative, got {seed}")
        self.seed = int(seed) & _M64

    def walk_key(self, start: int, walk_index: int) -> int:
        key = mix64(self.seed ^ mix64(start + _GOLDEN))
        return mix64(key ^ mix64(walk_index * _WALK_MUL))

    def choice(self, start: int, walk_index: int, step: int, bound: int) -> int:
        """Uniform integer in ``[0, bound)`` for one step of one walk."""
        h = mix64(self.walk_key(start, walk_index) + step * _GOLDEN)
        return ((h >> 11) * bound) >> 53


@numba.njit(inline="always")
def _mix(z):
    z = (z ^ (z >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> uint64(27))) * uint64(0x94D049BB133111EB)
    return z ^ (z >> uint64(31))


@numba.njit(cache=True)
def _walk_kernel(table, d, starts, walk_base, seed, r, t):
    ns = starts.shape[0]
    out = np.empty((ns, r), dtype=np.int64)
    twod = uint64(2 * d)
    ud = uint64(d)
    queries = 0
    for i in range(ns):
        start = starts[i]
        key = _mix(uint64(seed) ^ _mix(uint64(start) + uint64(0x9E3779B97F4A7C15)))
        base = walk_base[i]
        for w in range(r):
            k2 = _mix(key ^ _mix(uint64(base + w) * uint64(0xD1B54A32D192ED03)))
            v = start
            for s in range(t):
                h = _mix(k2 + uint64(s) * uint64(0x9E3779B97F4A7C15))
                j = ((h >> uint64(11)) * twod) >> uint64(53)
                if j < ud:
                    queries += 1
                    v = table[v, j]
            out[i, w] = v
    return out, queries


def walk_endpoints(
    g: BoundedDegreeGraph,
    starts: Iterable[int],
    t: int,
    r: int,
    seed: int,
    walk_base: Iterable[int] | None = None,
) -> tuple[np.ndarray, int]:
    """Endpoints of ``r`` walks of length ``t`` from each start.

    Walk ``w`` from ``starts[i]`` has walk index ``walk_base[i] + w`` (default
    base 0).  Returns the ``(len(starts), r)`` endpoint array and the number
    of neighbor queries issued (one per step that picks an edge slot).
    """
    starts = np.ascontiguousarray(np.asarray(list(starts), dtype=np.int64))
    if walk_base is None:
        walk_base = np.zeros(len(starts), dtype=np.int64)
    walk_base = np.ascontiguousarray(np.asarray(list(walk_base), dtype=np.int64))
    if len(walk_base) != len(starts):
        raise InputError("walk_base must have one entry per start")
    if t < 0 or r < 0:
        raise InputError(f"walk length and sample count must be >= 0 (t={t}, r={r})")
    if len(starts) and (starts.min() < 0 or starts.max() >= g.n):
        raise InputError(f"start vertex out of range [0,{g.n})")
    if g.d > MAX_WALK_DEGREE:
        raise CapacityError(f"walk sampling supports d <= {MAX_WALK_DEGREE}")
    if seed < 0:
        raise InputError(f"seed must be non-negative, got {seed}")
    out, q = _walk_kernel(g.step_table, g.d, starts, walk_base, int(seed) & _M64, int(r), int(t))
    return out, int(q)


def reference_walk(oracle: CountingOracle, start: int, t: int, rng: CounterRNG, walk_index: int) -> int:
    """Pure-Python walk through a query oracle; mirrors the compiled kernel draw-for-draw."""
    d = oracle.graph.d
    v = start
    for step in range(t):
        j = rng.choice(start, walk_index, step, 2 * d)
        if j < d:
            u = oracle(v, j)
            if u is not None:
                v = u
    return v


# ---------------------------------------------------------------------------
# single-walk API on numpy generators


def walk_step(g: BoundedDegreeGraph, v: int, rng: np.random.Generator) -> int:
    """One lazy step: each incident edge w.p. ``1/(2d)``, otherwise stay."""
    if not 0 <= v < g.n:
        raise InputError(f"vertex {v} out of range [0,{g.n})")
    j = int(rng.integers(2 * g.d))
    row = g.adjacency[v]
    return row[j] if j < len(row) else v


def sample_endpoint(g: BoundedDegreeGraph, v: int, t: int, rng: np.random.Generator) -> int:
    if t < 0:
        raise InputError(f"walk length must be >= 0, got {t}")
    for _ in range(t):
        v = walk_step(g, v, rng)
    return v


@dataclass(frozen=True)
class SampleCounts:
    """Histogram of ``r`` walk endpoints from ``origin``."""

    counts: dict
    r: int
    origin: int
    t: int

    def __post_init__(self):
        if sum(self.counts.values()) != self.r:
            raise InputError("sample counts do not sum to r")
        if any(c < 0 for c in self.counts.values()):
            raise InputError("negative sample count")

    @classmethod
    def from_endpoints(cls, endpoints, origin: int, t: int) -> "SampleCounts":
        verts, cnt = np.unique(np.asarray(endpoints, dtype=np.int64), return_counts=True)
        return cls(dict(zip(verts.tolist(), cnt.tolist())), int(len(endpoints)), origin, t)

    def as_array(self, n: int) -> np.ndarray:
        arr = np.zeros(n, dtype=np.int64)
        for v, c in self.counts.items():
            arr[v] = c
        return arr


def sample_counts(
    g: BoundedDegreeGraph, v: int, t: int, r: int, seed: int, walk_offset: int = 0
) -> SampleCounts:
    """Histogram of ``r`` independent endpoints (walk indices ``walk_offset..+r``)."""
    if r < 1:
        raise InputError(f"r must be >= 1, got {r}")
    ends, _ = walk_endpoints(g, [v], t, r, seed, [walk_offset])
    return SampleCounts.from_endpoints(ends[0], v, t)


# ---------------------------------------------------------------------------
# exact oracles


@dataclass(frozen=True)
class WalkDistribution:
    probs: np.ndarray
    t: int
    origin: int

    def __post_init__(self):
        if np.any(self.probs < -1e-15) or abs(self.probs.sum() - 1.0) > 1e-9:
            raise InputError("walk distribution is not a probability vector")

    @property
    def l2_norm_sq(self) -> float:
        return float(self.probs @ self.probs)


def _check_exact(g: BoundedDegreeGraph) -> None:
    if g.n > EXACT_CAP:
        raise CapacityError(f"exact distributions limited to n <= {EXACT_CAP} (got {g.n})")


def exact_distributions(g: BoundedDegreeGraph, starts: Iterable[int], t: int) -> np.ndarray:
    """``(n, len(starts))`` matrix whose column ``i`` is ``1_{starts[i]} W^t``."""
    _check_exact(g)
    if t < 0:
        raise InputError(f"walk length must be >= 0, got {t}")
    starts = np.asarray(list(starts), dtype=np.int64)
    P = np.zeros((g.n, len(starts)))
    P[starts, np.arange(len(starts))] = 1.0
    W = g.walk_operator
    for _ in range(t):
        P = W @ P  # W is symmetric, so W @ p is the row-vector update p W
    return P


def exact_distribution(g: BoundedDegreeGraph, v: int, t: int) -> WalkDistribution:
    if not 0 <= v < g.n:
        raise InputError(f"vertex {v} out of range [0,{g.n})")
    return WalkDistribution(exact_distributions(g, [v], t)[:, 0], t, v)


def remain_probabilities(g: BoundedDegreeGraph, A, t: int) -> np.ndarray:
    """Length-``n`` vector: probability a walk from each ``v`` stays in ``A`` for ``t`` steps.

    Entries outside ``A`` are 0.  Uses the symmetry of ``W``: the vector
    ``(I_A W I_A)^t 1_A`` holds every start's remain probability at once.
    """
    _check_exact(g)
    A = _as_vertex_set(g, A)
    mask = A.mask.astype(float)
    x = mask.copy()
    W = g.walk_operator
    for _ in range(t):
        x = (W @ x) * mask
    return x


def remain_probability(g: BoundedDegreeGraph, v: int, A, t: int) -> float:
    """Probability that a length-``t`` walk from ``v`` never leaves ``A``."""
    _check_exact(g)
    A = _as_vertex_set(g, A)
    if v not in A:
        raise InputError(f"start vertex {v} is not in A")
    mask = A.mask.astype(float)
    q = np.zeros(g.n)
    q[v] = 1.0
    W = g.walk_operator
    for _ in range(t):
        q = (W @ q) * mask
    return float(q.sum())


__all__ = [
    "CounterRNG",
    "SampleCounts",
    "VertexSet",
    "WalkDistribution",
    "exact_distribution",
    "exact_distributions",
    "reference_walk",
    "remain_probabilities",
    "remain_probability",
    "sample_counts",
    "sample_endpoint",
    "walk_endpoints",
    "walk_step",
]
