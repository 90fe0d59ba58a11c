import numpy as np
import pytest

from diffgm.delaunay import DegenerateGeometryError, delaunay, triangulate
from diffgm.generator import sample_points
from oracles import brute_force_delaunay_edges


def test_triangle():
    assert delaunay([[0, 0], [1, 0], [0, 1]]) == [(0, 1), (0, 2), (1, 2)]


def test_unit_square_diagonal_tie_break():
    edges = delaunay([[0, 0], [0, 1], [1, 0], [1, 1]])
    assert len(edges) == 5
    # both diagonals are Delaunay; the documented one joins points 1 and 2
    assert (1, 2) in edges and (0, 3) not in edges


@pytest.mark.parametrize("pts", [[[0, 0], [1, 1]], [[0, 0], [1, 1], [2, 2]], [[0, 0], [0, 0], [1, 0]]])
def test_degenerate_inputs(pts):
    with pytest.raises(DegenerateGeometryError):
        delaunay(pts)


def test_five_random_points_empty_circles():
    P = sample_points(np.random.default_rng(11), 5)
    assert delaunay(P) == brute_force_delaunay_edges(P)


def test_matches_brute_force_on_random_sets():
    rng = np.random.default_rng(2)
    for _ in range(40):
        P = sample_points(rng, int(rng.integers(3, 13)))
        assert delaunay(P) == brute_force_delaunay_edges(P)


def test_triangle_count_matches_euler_formula():
    rng = np.random.default_rng(4)
    for _ in range(20):
        n = int(rng.integers(3, 30))
        P = sample_points(rng, n)
        tris = triangulate(P)
        # a triangulation of n points with h on the hull has 2n - 2 - h triangles
        edges = delaunay(P)
        deg = {}
        for t in tris:
            for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                key = tuple(sorted(e))
                deg[key] = deg.get(key, 0) + 1
        h = sum(1 for c in deg.values() if c == 1)
        assert len(tris) == 2 * n - 2 - h
        assert len(edges) == 3 * n - 3 - h


def test_invariant_under_translation_and_scale():
    P = sample_points(np.random.default_rng(9), 10)
    assert delaunay(P) == delaunay(3.0 * P + np.array([5.0, -2.0]))
