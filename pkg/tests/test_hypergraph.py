"""Hypergraph structure and exact topology diagnostics."""

import itertools

import numpy as np
import pytest

from plusdc import (
    CapabilityError,
    Hypergraph,
    break_edges,
    cheeger_constant,
    weakly_admissible_diameter,
)

from conftest import four_team_graph


def random_graph(rng: np.random.Generator, n: int, n_edges: int, max_order: int) -> Hypergraph:
    edges = []
    for _ in range(n_edges):
        m = int(rng.integers(2, min(max_order, n) + 1))
        edges.append(tuple(sorted(rng.choice(n, size=m, replace=False) + 1)))
    return Hypergraph(n=n, edges=tuple(edges))


# ---------------------------------------------------------------------------
# construction and basic accessors


def test_edges_must_be_increasing():
    with pytest.raises(ValueError):
        Hypergraph(n=3, edges=((2, 1),))
    with pytest.raises(ValueError):
        Hypergraph(n=3, edges=((1, 1, 2),))


def test_edges_must_have_at_least_two_vertices():
    with pytest.raises(ValueError):
        Hypergraph(n=3, edges=((2,),))


def test_vertex_ids_must_be_in_range():
    with pytest.raises(ValueError):
        Hypergraph(n=3, edges=((1, 4),))
    with pytest.raises(ValueError):
        Hypergraph(n=3, edges=((0, 1),))


def test_degree_counts_multiplicity():
    g = Hypergraph(n=3, edges=((1, 2), (1, 2), (1, 2, 3)))
    assert g.degree(1) == 3
    assert g.degree(2) == 3
    assert g.degree(3) == 1
    assert g.degrees().tolist() == [3, 3, 1]


def test_degree_sum_equals_edge_size_sum():
    rng = np.random.default_rng(7)
    for _ in range(20):
        g = random_graph(rng, n=int(rng.integers(2, 9)), n_edges=int(rng.integers(0, 12)), max_order=5)
        assert int(g.degrees().sum()) == sum(len(e) for e in g.edges)


def test_boundary_basic():
    g = four_team_graph()
    assert g.boundary({1}) == (0, 1)
    assert g.boundary({1, 2}) == (1, 2, 3)


def test_boundary_symmetric_under_complement():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(3, 9))
        g = random_graph(rng, n=n, n_edges=int(rng.integers(1, 12)), max_order=4)
        size = int(rng.integers(1, n))
        u = set((rng.choice(n, size=size, replace=False) + 1).tolist())
        comp = set(range(1, n + 1)) - u
        assert g.boundary(u) == g.boundary(comp)


def test_boundary_rejects_empty_and_full_subsets():
    g = four_team_graph()
    with pytest.raises(ValueError):
        g.boundary(set())
    with pytest.raises(ValueError):
        g.boundary({1, 2, 3, 4})
    with pytest.raises(ValueError):
        g.boundary({0, 1})


def test_is_connected():
    assert four_team_graph().is_connected()
    assert not Hypergraph(n=3, edges=((1, 2),)).is_connected()
    assert Hypergraph(n=1, edges=()).is_connected()
    assert Hypergraph(n=4, edges=((1, 2, 3, 4),)).is_connected()
    assert not Hypergraph(n=4, edges=((1, 2), (3, 4))).is_connected()


# ---------------------------------------------------------------------------
# Cheeger constant


def cheeger_oracle(g: Hypergraph) -> float:
    """Independent subset-enumeration oracle."""
    best = float("inf")
    verts = range(1, g.n + 1)
    for size in range(1, g.n):
        for u in itertools.combinations(verts, size):
            su = set(u)
            bnd = 0
            for e in g.edges:
                inside = len(su.intersection(e))
                if 0 < inside < len(e):
                    bnd += 1
            best = min(best, bnd / min(size, g.n - size))
    return best


def test_cheeger_path_graph():
    g = Hypergraph(n=3, edges=((1, 2), (2, 3)))
    assert cheeger_constant(g) == 1.0


def test_cheeger_complete_pairwise_graph():
    edges = tuple(itertools.combinations(range(1, 5), 2))
    assert cheeger_constant(Hypergraph(n=4, edges=edges)) == 2.0


def test_cheeger_four_team_graph():
    g = four_team_graph()
    assert cheeger_constant(g) == 1.5
    assert len(g.boundary({1})) / 1 == 2.0
    assert len(g.boundary({1, 2})) / 2 == 1.5


def test_cheeger_single_vertex_is_infinite():
    assert cheeger_constant(Hypergraph(n=1, edges=())) == float("inf")


def test_cheeger_zero_iff_disconnected():
    rng = np.random.default_rng(3)
    for _ in range(25):
        n = int(rng.integers(2, 9))
        g = random_graph(rng, n=n, n_edges=int(rng.integers(0, 10)), max_order=4)
        h = cheeger_constant(g)
        assert (h > 0) == g.is_connected()


def test_cheeger_at_most_min_degree():
    rng = np.random.default_rng(5)
    for _ in range(25):
        g = random_graph(rng, n=int(rng.integers(2, 9)), n_edges=int(rng.integers(1, 12)), max_order=5)
        assert cheeger_constant(g) <= g.degrees().min()


def test_cheeger_matches_oracle_on_random_graphs():
    rng = np.random.default_rng(42)
    for _ in range(10):
        n = int(rng.integers(2, 11))
        edges = []
        for pair in itertools.combinations(range(1, n + 1), 2):
            if rng.random() < 0.8:
                edges.append(pair)
        g = Hypergraph(n=n, edges=tuple(edges))
        assert cheeger_constant(g) == pytest.approx(cheeger_oracle(g), abs=1e-12)


def test_cheeger_matches_oracle_on_multiway_graphs():
    rng = np.random.default_rng(43)
    for _ in range(8):
        g = random_graph(rng, n=int(rng.integers(3, 9)), n_edges=int(rng.integers(2, 10)), max_order=5)
        assert cheeger_constant(g) == pytest.approx(cheeger_oracle(g), abs=1e-12)


def test_cheeger_size_cap():
    g = Hypergraph(n=23, edges=((1, 2),))
    with pytest.raises(CapabilityError):
        cheeger_constant(g)


# ---------------------------------------------------------------------------
# weakly admissible diameter


def admissible_diameter_oracle(g: Hypergraph, lam: float) -> int:
    """Depth-first longest-chain search written independently of the DP."""

    def boundary_edges(su: set) -> list:
        out = []
        for e in g.edges:
            inside = len(su.intersection(e))
            if 0 < inside < len(e):
                out.append(set(e))
        return out

    verts = frozenset(range(1, g.n + 1))

    def extend(current: frozenset) -> int:
        bnd = boundary_edges(set(current))
        best = 1
        if not bnd:
            return best
        rest = verts - current
        for size in range(1, len(rest) + 1):
            for add in itertools.combinations(sorted(rest), size):
                grow = set(add)
                reached = sum(1 for e in bnd if e & grow)
                if reached / len(bnd) >= lam:
                    best = max(best, 1 + extend(current | frozenset(add)))
        return best

    return max(
        extend(frozenset(u))
        for size in range(1, g.n + 1)
        for u in itertools.combinations(range(1, g.n + 1), size)
    )


def test_diameter_single_pair():
    g = Hypergraph(n=2, edges=((1, 2),))
    assert weakly_admissible_diameter(g, 1.0) == 2


def test_diameter_four_team_graph():
    g = four_team_graph()
    assert weakly_admissible_diameter(g, 0.6) == 3
    assert weakly_admissible_diameter(g, 0.5) == 4


def test_diameter_nonincreasing_in_lambda():
    rng = np.random.default_rng(17)
    for _ in range(10):
        g = random_graph(rng, n=int(rng.integers(2, 7)), n_edges=int(rng.integers(1, 8)), max_order=4)
        lams = [0.2, 0.4, 0.6, 0.8, 1.0]
        values = [weakly_admissible_diameter(g, lam) for lam in lams]
        assert all(a >= b for a, b in zip(values, values[1:]))


def test_diameter_at_least_one():
    g = Hypergraph(n=3, edges=())
    assert weakly_admissible_diameter(g, 0.5) == 1


def test_diameter_matches_oracle():
    rng = np.random.default_rng(23)
    for _ in range(6):
        g = random_graph(rng, n=int(rng.integers(2, 6)), n_edges=int(rng.integers(1, 7)), max_order=4)
        for lam in (0.3, 0.5, 0.8, 1.0):
            assert weakly_admissible_diameter(g, lam) == admissible_diameter_oracle(g, lam)


def test_diameter_lambda_validation():
    g = four_team_graph()
    with pytest.raises(ValueError):
        weakly_admissible_diameter(g, 0.0)
    with pytest.raises(ValueError):
        weakly_admissible_diameter(g, 1.2)


def test_diameter_size_cap():
    g = Hypergraph(n=13, edges=((1, 2),))
    with pytest.raises(CapabilityError):
        weakly_admissible_diameter(g, 0.5)


# ---------------------------------------------------------------------------
# edge breaking


def test_break_edges_counts():
    g = Hypergraph(n=4, edges=((1, 2, 3, 4), (3, 4), (2, 4)))
    br = break_edges(g)
    assert br.n_pairs == sum(len(e) - 1 for e in g.edges)
    assert br.pairs.tolist() == [[1, 2], [1, 3], [1, 4], [3, 4], [2, 4]]
    assert br.edge_index.tolist() == [0, 0, 0, 1, 2]


def test_break_edges_anchored_at_smallest():
    rng = np.random.default_rng(29)
    for _ in range(15):
        g = random_graph(rng, n=int(rng.integers(3, 9)), n_edges=int(rng.integers(1, 10)), max_order=5)
        br = break_edges(g)
        assert br.n_pairs == sum(len(e) - 1 for e in g.edges)
        for (a, b), idx in zip(br.pairs.tolist(), br.edge_index.tolist()):
            e = g.edges[idx]
            assert a == e[0]
            assert b in e[1:]
            assert a < b


def test_break_edges_empty_graph():
    br = break_edges(Hypergraph(n=3, edges=()))
    assert br.n_pairs == 0
    assert br.pairs.shape == (0, 2)
