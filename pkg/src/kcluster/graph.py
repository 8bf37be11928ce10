"""Bounded-degree graphs, the neighbor-query oracle, and exact conductance."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numba
import numpy as np
from scipy.sparse import csr_matrix, diags
from scipy.sparse.csgraph import connected_components

from .errors import CapacityError, InputError

#: Largest vertex count for the exhaustive conductance oracle.
BRUTEFORCE_CAP = 24


class BoundedDegreeGraph:
    """Immutable simple undirected graph with a declared degree bound ``d``.

    ``adjacency[v]`` is the ordered neighbor list of ``v``; the order is what
    the neighbor-query oracle exposes.
    """

    __slots__ = ("n", "d", "adjacency", "__dict__")

    def __init__(self, n: int, d: int, adjacency: Sequence[Sequence[int]]):
        if n < 1:
            raise InputError(f"vertex count must be >= 1, got {n}")
        if d < 1:
            raise InputError(f"degree bound must be >= 1, got {d}")
        if len(adjacency) != n:
            raise InputError(f"adjacency has {len(adjacency)} rows, expected {n}")
        adj = tuple(tuple(int(u) for u in row) for row in adjacency)
        arcs: Counter = Counter()
        for v, row in enumerate(adj):
            if len(row) > d:
                raise InputError(f"vertex {v} has degree {len(row)} > d={d}")
            for u in row:
                if not 0 <= u < n:
                    raise InputError(f"neighbor {u} of vertex {v} out of range [0,{n})")
                if u == v:
                    raise InputError(f"self-loop at vertex {v}")
                arcs[(v, u)] += 1
        for (v, u), c in arcs.items():
            if c > 1:
                raise InputError(f"multi-edge between {v} and {u}")
            if arcs.get((u, v), 0) != c:
                raise InputError(f"adjacency not symmetric at edge ({v},{u})")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "d", int(d))
        object.__setattr__(self, "adjacency", adj)

    def __setattr__(self, name, value):
        if name in ("n", "d", "adjacency"):
            raise AttributeError("BoundedDegreeGraph is immutable")
        object.__setattr__(self, name, value)

    def __reduce__(self):
        # rebuild through __init__ (cached tables are recomputed lazily)
        return (self.__class__, (self.n, self.d, self.adjacency))

    @classmethod
    def from_edges(cls, n: int, d: int, edges: Iterable[tuple[int, int]]) -> "BoundedDegreeGraph":
        """Build from an edge list; neighbor order follows edge order."""
        adj: list[list[int]] = [[] for _ in range(n)]
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < n and 0 <= v < n):
                raise InputError(f"edge ({u},{v}) out of range [0,{n})")
            adj[u].append(v)
            adj[v].append(u)
        return cls(n, d, adj)

    def __repr__(self) -> str:
        return f"BoundedDegreeGraph(n={self.n}, d={self.d}, m={self.num_edges})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, BoundedDegreeGraph):
            return NotImplemented
        return (self.n, self.d, self.adjacency) == (other.n, other.d, other.adjacency)

    def __hash__(self) -> int:
        return hash((self.n, self.d, self.adjacency))

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.fromiter((len(r) for r in self.adjacency), dtype=np.int64, count=self.n)

    @cached_property
    def edges(self) -> np.ndarray:
        """Sorted ``(m, 2)`` array of edges with ``u < v``."""
        pairs = [(v, u) for v, row in enumerate(self.adjacency) for u in row if v < u]
        arr = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
        arr.setflags(write=False)
        return arr

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def neighbor_table(self) -> np.ndarray:
        """``(n, d)`` table; slot ``j`` holds the ``j``-th neighbor or -1."""
        table = np.full((self.n, self.d), -1, dtype=np.int64)
        for v, row in enumerate(self.adjacency):
            table[v, : len(row)] = row
        table.setflags(write=False)
        return table

    @cached_property
    def step_table(self) -> np.ndarray:
        """Like :attr:`neighbor_table` but absent slots point back at ``v``."""
        table = np.array(self.neighbor_table)
        rows = np.nonzero(table < 0)
        table[rows] = rows[0]
        table.setflags(write=False)
        return table

    @cached_property
    def adjacency_matrix(self) -> csr_matrix:
        e = self.edges
        data = np.ones(2 * len(e))
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        return csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    @cached_property
    def walk_operator(self) -> csr_matrix:
        """Symmetric lazy-walk operator ``W = I/2 + (A + diag(d - deg))/(2d)``."""
        diag = 0.5 + (self.d - self.degrees) / (2.0 * self.d)
        return (self.adjacency_matrix / (2.0 * self.d) + diags(diag)).tocsr()

    def component_labels(self) -> tuple[int, np.ndarray]:
        return connected_components(self.adjacency_matrix, directed=False)

    def to_edgelist(self) -> str:
        lines = [f"{self.n} {self.d}"]
        lines.extend(f"{u} {v}" for u, v in self.edges)
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class VertexSet:
    """Sorted, duplicate-free subset of ``range(n)``."""

    n: int
    members: tuple[int, ...]
    _mask: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        members = tuple(int(v) for v in self.members)
        if any(b <= a for a, b in zip(members, members[1:])):
            raise InputError("VertexSet members must be strictly ascending")
        if members and not (0 <= members[0] and members[-1] < self.n):
            raise InputError(f"VertexSet members must lie in [0,{self.n})")
        object.__setattr__(self, "members", members)
        mask = np.zeros(self.n, dtype=bool)
        mask[list(members)] = True
        mask.setflags(write=False)
        object.__setattr__(self, "_mask", mask)

    @classmethod
    def of(cls, n: int, vertices: Iterable[int]) -> "VertexSet":
        return cls(n, tuple(sorted({int(v) for v in vertices})))

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "VertexSet":
        return cls(len(mask), tuple(np.flatnonzero(mask).tolist()))

    @property
    def mask(self) -> np.ndarray:
        return self._mask

    def complement(self) -> "VertexSet":
        return VertexSet.from_mask(~self._mask)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, v) -> bool:
        return 0 <= v < self.n and bool(self._mask[v])


def _as_vertex_set(g: BoundedDegreeGraph, S) -> VertexSet:
    if isinstance(S, VertexSet):
        if S.n != g.n:
            raise InputError(f"VertexSet over n={S.n} used with graph of n={g.n}")
        return S
    return VertexSet.of(g.n, S)


def neighbor_query(g: BoundedDegreeGraph, v: int, i: int) -> int | None:
    """Return the ``i``-th neighbor of ``v`` (0-based), or ``None``."""
    if not 0 <= v < g.n:
        raise InputError(f"vertex {v} out of range [0,{g.n})")
    row = g.adjacency[v]
    if 0 <= i < len(row):
        return row[i]
    return None


class CountingOracle:
    """Neighbor-query oracle that counts every query it answers."""

    def __init__(self, g: BoundedDegreeGraph):
        self.graph = g
        self.queries = 0

    def __call__(self, v: int, i: int) -> int | None:
        self.queries += 1
        return neighbor_query(self.graph, v, i)


def cut_size(g: BoundedDegreeGraph, S) -> int:
    """Number of edges with exactly one endpoint in ``S``."""
    mask = _as_vertex_set(g, S).mask
    e = g.edges
    if len(e) == 0:
        return 0
    return int(np.count_nonzero(mask[e[:, 0]] != mask[e[:, 1]]))


def outer_conductance(g: BoundedDegreeGraph, S) -> Fraction:
    """``e(S, V - S) / (d |S|)`` as an exact rational."""
    S = _as_vertex_set(g, S)
    if len(S) == 0:
        raise InputError("conductance of the empty set is undefined")
    if len(S) == g.n:
        return Fraction(0)
    return Fraction(cut_size(g, S), g.d * len(S))


@numba.njit(cache=True)
def _gray_min_cut(nbr, n, half):
    # Enumerate all subsets in Gray-code order, tracking cut size incrementally.
    inset = np.zeros(n, dtype=np.bool_)
    cut = 0
    size = 0
    best_cut = -1
    best_size = 1
    best_mask = 0
    mask = 0
    total = 1 << n
    for i in range(1, total):
        b = 0
        x = i
        while (x & 1) == 0:
            x >>= 1
            b += 1
        mask ^= 1 << b
        entering = not inset[b]
        for j in range(nbr.shape[1]):
            w = nbr[b, j]
            if w < 0:
                break
            if inset[w] == entering:
                cut -= 1
            else:
                cut += 1
        inset[b] = entering
        size += 1 if entering else -1
        if 1 <= size <= half:
            if best_cut < 0 or cut * best_size < best_cut * size:
                best_cut = cut
                best_size = size
                best_mask = mask
    return best_cut, best_size, best_mask


@numba.njit(cache=True)
def _gray_all_cuts(nbr, n):
    total = 1 << n
    cuts = np.zeros(total, dtype=np.int64)
    inset = np.zeros(n, dtype=np.bool_)
    cut = 0
    mask = 0
    for i in range(1, total):
        b = 0
        x = i
        while (x & 1) == 0:
            x >>= 1
            b += 1
        mask ^= 1 << b
        entering = not inset[b]
        for j in range(nbr.shape[1]):
            w = nbr[b, j]
            if w < 0:
                break
            if inset[w] == entering:
                cut -= 1
            else:
                cut += 1
        inset[b] = entering
        cuts[mask] = cut
    return cuts


def _check_bruteforce(n: int, cap: int = BRUTEFORCE_CAP) -> None:
    if n > cap:
        raise CapacityError(
            f"exhaustive conductance limited to n <= {cap} (got n={n}); "
            "use the spectral bounds in kcluster.spectral instead"
        )


def min_conductance_cut(g: BoundedDegreeGraph) -> tuple[Fraction, VertexSet | None]:
    """Exact ``phi(G)`` together with a minimizing set (``None`` for a singleton)."""
    _check_bruteforce(g.n)
    if g.n == 1:
        return Fraction(1, g.d), None
    best_cut, best_size, best_mask = _gray_min_cut(g.neighbor_table, g.n, g.n // 2)
    members = [v for v in range(g.n) if (best_mask >> v) & 1]
    return Fraction(int(best_cut), g.d * int(best_size)), VertexSet(g.n, tuple(members))


def min_conductance_bruteforce(g: BoundedDegreeGraph) -> Fraction:
    """Exact conductance ``phi(G)`` by exhaustive enumeration (n <= 24)."""
    return min_conductance_cut(g)[0]


def all_cut_sizes(g: BoundedDegreeGraph, cap: int = 20) -> np.ndarray:
    """Cut size of every subset, indexed by bitmask."""
    _check_bruteforce(g.n, cap)
    return _gray_all_cuts(g.neighbor_table, g.n)


def induced_subgraph(g: BoundedDegreeGraph, S) -> tuple[BoundedDegreeGraph, tuple[int, ...]]:
    """``G[S]`` with ids remapped to ``range(|S|)``; returns the graph and the id map.

    ``id_map[i]`` is the original id of new vertex ``i``.  The degree bound is
    inherited from ``g``.
    """
    S = _as_vertex_set(g, S)
    if len(S) == 0:
        raise InputError("induced subgraph of the empty set")
    index = {v: i for i, v in enumerate(S.members)}
    adj = [[index[u] for u in g.adjacency[v] if u in index] for v in S.members]
    return BoundedDegreeGraph(len(S), g.d, adj), S.members


def inner_conductance(g: BoundedDegreeGraph, S) -> Fraction:
    """``phi(G[S])`` computed exactly with the degree bound of ``g``."""
    S = _as_vertex_set(g, S)
    _check_bruteforce(len(S))
    sub, _ = induced_subgraph(g, S)
    return min_conductance_bruteforce(sub)


def load_edgelist(path: str | Path) -> BoundedDegreeGraph:
    return parse_edgelist(Path(path).read_text())


def parse_edgelist(text: str) -> BoundedDegreeGraph:
    """Parse the ``n d`` header + ``u v`` lines format."""
    lines = text.splitlines()
    if not lines:
        raise InputError("line 1: empty edge-list")
    try:
        n, d = (int(x) for x in lines[0].split())
    except ValueError:
        raise InputError(f"line 1: expected 'n d', got {lines[0]!r}") from None
    edges = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            u, v = (int(x) for x in line.split())
        except ValueError:
            raise InputError(f"line {lineno}: expected 'u v', got {line!r}") from None
        if not 0 <= u < v < n:
            raise InputError(f"line {lineno}: need 0 <= u < v < n, got {u} {v}")
        edges.append((u, v))
    try:
        return BoundedDegreeGraph.from_edges(n, d, edges)
    except InputError as exc:
        raise InputError(f"invalid graph: {exc}") from None


def save_edgelist(g: BoundedDegreeGraph, path: str | Path) -> None:
    Path(path).write_text(g.to_edgelist())
