"""Random comparison-hypergraph samplers.

Two edge-generation models are provided: a nonuniform random hypergraph
with an independent inclusion probability per edge size, and a uniform
stochastic block model with within-block and cross-block densities.  On
top of these sit two fixed-edge-count experiment designs used by the
simulation harness.

Randomness policy: every sampler takes an explicit integer seed and an
optional stream index.  Draws come from a Philox counter-based 64-bit
generator keyed by ``SeedSequence(seed, spawn_key=(stream,))``, so
parallel callers obtain disjoint reproducible streams by varying
``stream``.  Seed, stream, and generator name are echoed in the returned
metadata.

Edges are drawn by sampling integer ranks uniformly from the number of
m-subsets and decoding them through the colexicographic combinadic, so
no candidate enumeration ever happens.  Ranks are drawn with
replacement: repeated edges are possible and kept, which matches
independent-inclusion sampling exactly whenever no rank repeats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import numpy.typing as npt

from .errors import CapabilityError, InputError
from .hypergraph import Hypergraph

_MAX_RANK = 2**63 - 1

GENERATOR_NAME = "Philox"


def derive_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for (seed, stream); documented sub-stream rule."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream,))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class NurhmSpec:
    """Nonuniform random hypergraph: Bernoulli inclusion per edge size.

    Attributes:
        n: Number of vertices.
        p: Mapping from edge size m (>= 2) to inclusion probability; every
            m-subset of the vertices is an edge independently with
            probability p[m].
    """

    n: int
    p: Mapping[int, float]

    def __post_init__(self) -> None:
        if self.n < 2:
            raise InputError(f"need at least two vertices, got n={self.n}")
        object.__setattr__(self, "p", dict(self.p))
        for m, pm in self.p.items():
            if not 2 <= m <= self.n:
                raise InputError(f"edge size {m} outside 2..{self.n}")
            if not 0.0 <= pm <= 1.0:
                raise InputError(f"inclusion probability p[{m}]={pm} outside [0, 1]")


@dataclass(frozen=True)
class HsbmSpec:
    """Uniform hypergraph stochastic block model.

    Vertices are split into contiguous blocks: the first block_sizes[0]
    ids form block 1, and so on.  Every `order`-subset living inside
    block l is an edge with probability within[l-1]; every subset that
    straddles blocks is an edge with probability cross.

    Attributes:
        n: Number of vertices.
        order: Uniform edge size M.
        block_sizes: Vertex counts per block; must sum to n.
        within: Within-block inclusion probability per block.
        cross: Cross-block inclusion probability.
    """

    n: int
    order: int
    block_sizes: tuple[int, ...]
    within: tuple[float, ...]
    cross: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "block_sizes", tuple(int(b) for b in self.block_sizes))
        object.__setattr__(self, "within", tuple(float(w) for w in self.within))
        if self.order < 2 or self.order > self.n:
            raise InputError(f"edge order {self.order} outside 2..{self.n}")
        if sum(self.block_sizes) != self.n:
            raise InputError(
                f"block sizes {self.block_sizes} sum to {sum(self.block_sizes)}, expected n={self.n}"
            )
        if any(b < 0 for b in self.block_sizes):
            raise InputError(f"negative block size in {self.block_sizes}")
        if len(self.within) != len(self.block_sizes):
            raise InputError("need one within-block probability per block")
        for w in (*self.within, self.cross):
            if not 0.0 <= w <= 1.0:
                raise InputError(f"inclusion probability {w} outside [0, 1]")

    def block_offsets(self) -> tuple[int, ...]:
        out, acc = [], 0
        for b in self.block_sizes:
            out.append(acc)
            acc += b
        return tuple(out)


def _comb_column(n: int, k: int) -> npt.NDArray[np.int64]:
    """C(x, k) for x = 0..n-1 as int64, for combinadic decoding."""
    col = np.zeros(n, dtype=np.int64)
    val = 0
    for x in range(n):
        val = math.comb(x, k)
        if val > _MAX_RANK:
            raise CapabilityError(f"C({x}, {k}) exceeds 63-bit rank space")
        col[x] = val
    return col


def _unrank_colex(n: int, m: int, ranks: npt.NDArray[np.int64]) -> npt.NDArray[np.int64]:
    """Decode subset ranks to strictly increasing 0-based m-tuples."""
    out = np.empty((ranks.size, m), dtype=np.int64)
    r = ranks.copy()
    for i in range(m - 1, -1, -1):
        table = _comb_column(n, i + 1)
        c = np.searchsorted(table, r, side="right") - 1
        out[:, i] = c
        r = r - table[c]
    return out

def _draw_uniform_subsets(
    rng: np.random.Generator, n: int, m: int, count: int
) -> npt.NDArray[np.int64]:
    """`count` uniform m-subsets of {0..n-1}, rank-sorted, with replacement."""
    total = math.comb(n, m)
    if total > _MAX_RANK:
        raise CapabilityError(f"C({n}, {m}) exceeds 63-bit rank space")
    if count == 0:
        return np.empty((0, m), dtype=np.int64)
    ranks = rng.integers(0, total, size=count, dtype=np.int64)
    ranks.sort()
    return _unrank_colex(n, m, ranks)


def _meta(seed: int, stream: int) -> dict:
    return {"seed": int(seed), "stream": int(stream), "bit_generator": GENERATOR_NAME}


def sample_nurhm(spec: NurhmSpec, seed: int, stream: int = 0) -> tuple[Hypergraph, dict]:
    """Sample a nonuniform random hypergraph.

    Per size m the number of edges is Binomial(C(n, m), p[m]) and the
    edges themselves are uniform m-subsets, which reproduces independent
    Bernoulli inclusion.  Edges are emitted size-major, rank-sorted
    within a size.

    Returns:
        (graph, metadata); metadata records the spec, seed/stream, and
        realized edge count per size.
    """
    rng = derive_rng(seed, stream)
    edges: list[tuple[int, ...]] = []
    realized: dict[int, int] = {}
    for m in sorted(spec.p):
        total = math.comb(spec.n, m)
        if total > _MAX_RANK:
            raise CapabilityError(f"C({spec.n}, {m}) exceeds 63-bit rank space")
        count = int(rng.binomial(total, spec.p[m])) if total > 0 else 0
        subsets = _draw_uniform_subsets(rng, spec.n, m, count)
        edges.extend(tuple(int(v) + 1 for v in row) for row in subsets)
        realized[m] = count
    meta = {
        "model": "nurhm",
        "n": spec.n,
        "p": {str(m): spec.p[m] for m in sorted(spec.p)},
        "edge_counts": {str(m): realized[m] for m in sorted(realized)},
        "n_edges": len(edges),
        **_meta(seed, stream),
    }
    return Hypergraph(n=spec.n, edges=tuple(edges)), meta


def _cross_subsets(
    rng: np.random.Generator, spec: HsbmSpec, count: int
) -> npt.NDArray[np.int64]:
    """Uniform order-subsets straddling at least two blocks, by rejection."""
    m = spec.order
    offsets = spec.block_offsets()
    blocks = [(off, off + b) for off, b in zip(offsets, spec.block_sizes)]
    got: list[npt.NDArray[np.int64]] = []
    have = 0
    while have < count:
        batch = max(64, 2 * (count - have))
        cand = _draw_uniform_subsets(rng, spec.n, m, batch)
        lo, hi = cand[:, 0], cand[:, -1]
        inside = np.zeros(batch, dtype=bool)
        for a, b in blocks:
            inside |= (lo >= a) & (hi < b)
        keep = cand[~inside]
        got.append(keep[: count - have])
        have += min(keep.shape[0], count - have)
    if count == 0:
        return np.empty((0, m), dtype=np.int64)
    return np.vstack(got)


def sample_hsbm(spec: HsbmSpec, seed: int, stream: int = 0) -> tuple[Hypergraph, dict]:
    """Sample a uniform hypergraph stochastic block model.

    Within-block edges are drawn per block exactly as in the nonuniform
    sampler; cross-block edges draw a Binomial count over the straddling
    subsets and realize them by rejection against block membership.
    Edge order: block 1 edges, block 2 edges, ..., then cross edges.
    """
    rng = derive_rng(seed, stream)
    m = spec.order
    edges: list[tuple[int, ...]] = []
    realized: dict[str, int] = {}
    n_inside = 0
    for i, (size, w) in enumerate(zip(spec.block_sizes, spec.within)):
        total = math.comb(size, m)
        n_inside += total
        count = int(rng.binomial(total, w)) if total > 0 else 0
        subsets = _draw_uniform_subsets(rng, size, m, count)
        off = spec.block_offsets()[i]
        edges.extend(tuple(int(v) + off + 1 for v in row) for row in subsets)
        realized[f"within_{i + 1}"] = count
    total_cross = math.comb(spec.n, m) - n_inside
    count = int(rng.binomial(total_cross, spec.cross)) if total_cross > 0 else 0
    for row in _cross_subsets(rng, spec, count):
        edges.append(tuple(int(v) + 1 for v in row))
    realized["cross"] = count
    meta = {
        "model": "hsbm",
        "n": spec.n,
        "order": m,
        "block_sizes": list(spec.block_sizes),
        "within": list(spec.within),
        "cross": spec.cross,
        "edge_counts": realized,
        "n_edges": len(edges),
        **_meta(seed, stream),
    }
    return Hypergraph(n=spec.n, edges=tuple(edges)), meta


def expected_edge_orders(spec: NurhmSpec | HsbmSpec) -> dict[int, float]:
    """Expected number of edges per size under the sampling model."""
    if isinstance(spec, NurhmSpec):
        return {m: math.comb(spec.n, m) * pm for m, pm in sorted(spec.p.items())}
    inside = sum(math.comb(b, spec.order) * w for b, w in zip(spec.block_sizes, spec.within))
    n_inside = sum(math.comb(b, spec.order) for b in spec.block_sizes)
    cross = (math.comb(spec.n, spec.order) - n_inside) * spec.cross
    return {spec.order: inside + cross}


def nurhm6_edge_count(n: int) -> int:
    """Edge budget 0.1 n (ln n)^3 for the six-size design, floored."""
    return int(math.floor(0.1 * n * math.log(n) ** 3))


def hsbm2_edge_count(n: int) -> int:
    """Edge budget 0.07 n^2 for the two-block design, rounded."""
    return int(round(0.07 * n * n))


def sample_experiment_design(
    kind: str, n: int, seed: int, stream: int = 0, n_edges: int | None = None
) -> tuple[Hypergraph, dict]:
    """Sample one of the two fixed-edge-count experiment designs.

    ``nurhm6``: edge sizes 2..7 with the budget split equally across
    sizes (remainder, smallest sizes first); each edge is a uniform
    subset of its size.  Default budget floor(0.1 n (ln n)^3).

    ``hsbm2``: all edges of size 5; two blocks of floor(n/3) and the
    rest; each edge falls inside block 1 / inside block 2 / across
    blocks with probabilities proportional to 5n : 20n : 4 (ln n)^3
    (natural log, echoed in metadata) and is uniform within its class.
    Default budget round(0.07 n^2).

    Args:
        kind: "nurhm6" or "hsbm2".
        n: Number of vertices.
        seed: Root seed; `stream` selects a sub-stream.
        n_edges: Optional override of the default edge budget.

    Returns:
        (graph, metadata) with the realized class counts.

    Raises:
        InputError: Unknown kind, or a class budget exceeding its number
            of distinct subsets.
    """
    rng = derive_rng(seed, stream)
    if kind == "nurhm6":
        total = n_edges if n_edges is not None else nurhm6_edge_count(n)
        sizes = range(2, 8)
        base, rem = divmod(total, 6)
        counts = {m: base + (1 if m - 2 < rem else 0) for m in sizes}
        edges: list[tuple[int, ...]] = []
        for m in sizes:
            if counts[m] > math.comb(n, m):
                raise InputError(
                    f"size-{m} budget {counts[m]} exceeds the {math.comb(n, m)} distinct subsets"
                )
            subsets = _draw_uniform_subsets(rng, n, m, counts[m])
            edges.extend(tuple(int(v) + 1 for v in row) for row in subsets)
        meta = {
            "design": "nurhm6",
            "n": n,
            "n_edges": total,
            "size_counts": {str(m): counts[m] for m in sizes},
            **_meta(seed, stream),
        }
        return Hypergraph(n=n, edges=tuple(edges)), meta
    if kind == "hsbm2":
        total = n_edges if n_edges is not None else hsbm2_edge_count(n)
        m = 5
        n1 = n // 3
        spec = HsbmSpec(n=n, order=m, block_sizes=(n1, n - n1), within=(0.0, 0.0), cross=0.0)
        weights = np.array([5.0 * n, 20.0 * n, 4.0 * math.log(n) ** 3])
        counts = rng.multinomial(total, weights / weights.sum())
        pools = [math.comb(n1, m), math.comb(n - n1, m), math.comb(n, m) - math.comb(n1, m) - math.comb(n - n1, m)]
        for label, c, pool in zip(("within_1", "within_2", "cross"), counts, pools):
            if c > pool:
                raise InputError(f"{label} budget {c} exceeds the {pool} distinct subsets")
        edges = []
        sub1 = _draw_uniform_subsets(rng, n1, m, int(counts[0]))
        edges.extend(tuple(int(v) + 1 for v in row) for row in sub1)
        sub2 = _draw_uniform_subsets(rng, n - n1, m, int(counts[1]))
        edges.extend(tuple(int(v) + n1 + 1 for v in row) for row in sub2)
        for row in _cross_subsets(rng, spec, int(counts[2])):
            edges.append(tuple(int(v) + 1 for v in row))
        meta = {
            "design": "hsbm2",
            "n": n,
            "n_edges": total,
            "order": m,
            "block_sizes": [n1, n - n1],
            "class_counts": {"within_1": int(counts[0]), "within_2": int(counts[1]), "cross": int(counts[2])},
            "community_ratio": {"within_1": 5.0 * n, "within_2": 20.0 * n, "cross": 4.0 * math.log(n) ** 3, "log": "natural"},
            **_meta(seed, stream),
        }
        return Hypergraph(n=n, edges=tuple(edges)), meta
    raise InputError(f"unknown experiment design {kind!r}; expected 'nurhm6' or 'hsbm2'")
