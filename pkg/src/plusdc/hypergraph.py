"""Comparison hypergraphs and exact topology diagnostics.

A comparison hypergraph records which objects met in which multiway
comparisons.  Vertices are numbered 1..n; each hyperedge is a strictly
increasing tuple of at least two vertex ids.  Repeated edges are allowed
(the same group of objects can meet more than once) and every quantity
that counts edges counts them with multiplicity.

Besides the basic structure this module provides the exact expansion
diagnostics used to reason about estimability: the Cheeger constant of
the hypergraph bipartition profile, the longest weakly admissible vertex
sequence, and the breaking of multiway edges into oriented pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import numpy.typing as npt

from .errors import CapabilityError

CHEEGER_MAX_VERTICES = 22
DIAMETER_MAX_VERTICES = 12


@dataclass(frozen=True)
class Hypergraph:
    """Multiway comparison graph on vertices 1..n.

    Attributes:
        n: Number of vertices.
        edges: Hyperedges as strictly increasing tuples of vertex ids.
            Order is meaningful only as a stable storage order; duplicate
            edges are permitted and counted with multiplicity.
    """

    n: int
    edges: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"need at least one vertex, got n={self.n}")
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        for e in self.edges:
            if len(e) < 2:
                raise ValueError(f"edge {e} has fewer than two vertices")
            if any(a >= b for a, b in zip(e, e[1:])):
                raise ValueError(f"edge {e} is not strictly increasing")
            if e[0] < 1 or e[-1] > self.n:
                raise ValueError(f"edge {e} has vertex ids outside 1..{self.n}")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def max_order(self) -> int:
        """Largest edge size, or 0 for an edgeless graph."""
        return max((len(e) for e in self.edges), default=0)

    def degree(self, k: int) -> int:
        """Number of edges containing vertex k, with multiplicity."""
        if not 1 <= k <= self.n:
            raise ValueError(f"vertex {k} outside 1..{self.n}")
        return sum(1 for e in self.edges if k in e)

    def degrees(self) -> npt.NDArray[np.int64]:
        """Degree of every vertex as an array indexed by vertex id - 1."""
        deg = np.zeros(self.n, dtype=np.int64)
        for e in self.edges:
            for v in e:
                deg[v - 1] += 1
        return deg

    def boundary(self, subset: Iterable[int]) -> tuple[int, ...]:
        """Indices of edges meeting both `subset` and its complement.

        Args:
            subset: Nonempty proper subset of the vertices.

        Returns:
            Sorted edge indices, multi-edges counted individually.

        Raises:
            ValueError: If the subset is empty, full, or has ids outside 1..n.
        """
        u = set(subset)
        if not u:
            raise ValueError("subset is empty")
        if not u <= set(range(1, self.n + 1)):
            raise ValueError(f"subset {sorted(u)} has ids outside 1..{self.n}")
        if len(u) == self.n:
            raise ValueError("subset is the full vertex set")
        out = []
        for i, e in enumerate(self.edges):
            inside = sum(1 for v in e if v in u)
            if 0 < inside < len(e):
                out.append(i)
        return tuple(out)

    def is_connected(self) -> bool:
        """Whether every pair of vertices is joined by a path of edges.

        Uses union-find over the edge list; isolated vertices make the
        graph disconnected (unless n == 1).
        """
        parent = list(range(self.n + 1))

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for e in self.edges:
            ra = find(e[0])
            for v in e[1:]:
                rv = find(v)
                if rv != ra:
                    parent[rv] = ra
        roots = {find(v) for v in range(1, self.n + 1)}
        return len(roots) == 1


@dataclass(frozen=True)
class Breaking:
    """Oriented pairs obtained by breaking multiway edges.

    Each edge (j_1, ..., j_m) with j_1 smallest contributes the pairs
    (j_1, j_t) for t = 2..m.  `edge_index[r]` maps pair row r back to the
    source edge's position in the hypergraph edge list.

    Attributes:
        n: Number of vertices of the source hypergraph.
        pairs: Array of shape (n_pairs, 2) holding (source, target) ids.
        edge_index: Array of shape (n_pairs,) with source edge indices.
    """

    n: int
    pairs: npt.NDArray[np.int64]
    edge_index: npt.NDArray[np.int64]

    @property
    def n_pairs(self) -> int:
        return int(self.pairs.shape[0])


def break_edges(graph: Hypergraph) -> Breaking:
    """Break every edge into oriented pairs anchored at its smallest vertex.

    The total number of pairs is sum over edges of (size - 1).  Pair order
    follows edge order, then within-edge target order.
    """
    pairs = []
    edge_index = []
    for i, e in enumerate(graph.edges):
        for t in e[1:]:
            pairs.append((e[0], t))
            edge_index.append(i)
    pair_arr = np.array(pairs, dtype=np.int64).reshape(len(pairs), 2)
    return Breaking(n=graph.n, pairs=pair_arr, edge_index=np.array(edge_index, dtype=np.int64))


def _edge_bitmasks(graph: Hypergraph) -> npt.NDArray[np.uint64]:
    masks = np.zeros(graph.n_edges, dtype=np.uint64)
    for i, e in enumerate(graph.edges):
        m = 0
        for v in e:
            m |= 1 << (v - 1)
        masks[i] = m
    return masks


def cheeger_constant(graph: Hypergraph, *, max_vertices: int = CHEEGER_MAX_VERTICES) -> float:
    """Exact bipartition expansion constant of the hypergraph.

    Minimizes |boundary(U)| / min(|U|, n - |U|) over all nonempty proper
    vertex subsets U by exhaustive enumeration of the subsets with
    |U| <= n/2.  The value is 0 exactly when the graph is disconnected,
    and +inf for a single-vertex graph (no proper bipartition exists).

    Args:
        graph: Hypergraph to analyze.
        max_vertices: Refuse graphs larger than this (enumeration is 2^n).

    Raises:
        CapabilityError: If graph.n exceeds `max_vertices`.
    """
    n = graph.n
    if n > max_vertices:
        raise CapabilityError(
            f"exact Cheeger constant enumerates 2^n subsets; n={n} exceeds cap {max_vertices}"
        )
    if n == 1:
        return float("inf")
    if graph.n_edges == 0:
        return 0.0
    masks = _edge_bitmasks(graph)
    full = np.uint64((1 << n) - 1)
    best = float("inf")
    subsets = np.arange(1, 1 << n, dtype=np.uint64)
    sizes = np.bitwise_count(subsets).astype(np.int64)
    keep = sizes <= n // 2
    subsets, sizes = subsets[keep], sizes[keep]
    chunk = 1 << 16
    for lo in range(0, subsets.size, chunk):
        u = subsets[lo : lo + chunk, None]
        hits_in = (u & masks[None, :]) != 0
        hits_out = ((~u & full) & masks[None, :]) != 0
        bnd = np.count_nonzero(hits_in & hits_out, axis=1)
        ratio = bnd / sizes[lo : lo + chunk]
        best = min(best, float(ratio.min()))
    return best


def weakly_admissible_diameter(
    graph: Hypergraph, lam: float, *, max_vertices: int = DIAMETER_MAX_VERTICES
) -> int:
    """Length of the longest weakly admissible increasing vertex-set chain.

    A chain A_1 < A_2 < ... < A_J of vertex subsets is weakly admissible
    at level `lam` when, for every consecutive pair, at least a `lam`
    fraction of the boundary edges of A_j reach into A_{j+1} \\ A_j.  A
    chain of length one is vacuously admissible, so the result is >= 1.

    Args:
        graph: Hypergraph to analyze.
        lam: Required boundary fraction, in (0, 1].
        max_vertices: Refuse graphs larger than this (search is over 3^n
            subset pairs).

    Raises:
        CapabilityError: If graph.n exceeds `max_vertices`.
        ValueError: If lam is outside (0, 1].
    """
    n = graph.n
    if n > max_vertices:
        raise CapabilityError(
            f"admissible-chain search visits 3^n subset pairs; n={n} exceeds cap {max_vertices}"
        )
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lam must be in (0, 1], got {lam}")
    masks = _edge_bitmasks(graph)
    full = (1 << n) - 1
    # Boundary edge masks per subset, reused across all successor checks.
    bnd_masks: list[npt.NDArray[np.uint64]] = [np.zeros(0, dtype=np.uint64)] * (full + 1)
    for a in range(1, full + 1):
        ua = np.uint64(a)
        hits = ((ua & masks) != 0) & (((~ua & np.uint64(full)) & masks) != 0)
        bnd_masks[a] = masks[hits]
    longest = [1] * (full + 1)
    # Supersets of a have strictly more bits, so descending popcount order
    # guarantees successors are finalized before their predecessors.
    order = sorted(range(1, full + 1), key=lambda a: bin(a).count("1"), reverse=True)
    for a in order:
        bnd = bnd_masks[a]
        if bnd.size == 0:
            continue
        need = lam * bnd.size
        comp = full & ~a
        s = comp
        best = 0
        while s:
            grown = np.uint64(s)
            reached = int(np.count_nonzero((bnd & grown) != 0))
            if reached >= need and longest[a | s] > best:
                best = longest[a | s]
            s = (s - 1) & comp
        if best:
            longest[a] = 1 + best
    return max(longest[1:])
