"""Incremental Bowyer-Watson Delaunay triangulation of planar points."""

from __future__ import annotations

import numpy as np


class DegenerateGeometryError(ValueError):
    """Too few points, duplicates, or all points collinear."""


def orient(a, b, c) -> float:
    """Twice the signed area of triangle ``abc`` (positive if counter-clockwise)."""
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def incircle(a, b, c, d) -> float:
    """Positive iff ``d`` lies strictly inside the circumcircle of ccw ``abc``."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    ad = adx * adx + ady * ady
    bd = bdx * bdx + bdy * bdy
    cd = cdx * cdx + cdy * cdy
    return (adx * (bdy * cd - bd * cdy)
            - ady * (bdx * cd - bd * cdx)
            + ad * (bdx * cdy - bdy * cdx))


def _validate(points) -> np.ndarray:
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[1] != 2:
        raise DegenerateGeometryError("points must have shape (n, 2)")
    if len(P) < 3:
        raise DegenerateGeometryError("at least 3 points are required")
    if not np.all(np.isfinite(P)):
        raise DegenerateGeometryError("non-finite coordinates")
    if len(np.unique(P, axis=0)) != len(P):
        raise DegenerateGeometryError("duplicate points")
    a, b = P[0], P[1]
    if all(orient(a, b, c) == 0.0 for c in P[2:]):
        raise DegenerateGeometryError("all points are collinear")
    return P


def triangulate(points, super_scale: float = 1e3) -> list[tuple[int, int, int]]:
    """Delaunay triangles as counter-clockwise index triples.

    Points are inserted in lexicographic ``(x, y)`` order and a point on a
    circumcircle does not invalidate the triangle, which fixes the diagonal
    chosen for co-circular quadruples. For four square corners the diagonal
    joins the 2nd and 3rd point in lexicographic order.
    """
    P = _validate(points)
    n = len(P)
    lo, hi = P.min(axis=0), P.max(axis=0)
    center = (lo + hi) / 2.0
    span = max(float(np.max(hi - lo)), 1e-12) * super_scale
    super_pts = np.array([
        [center[0] - 2 * span, center[1] - span],
        [center[0] + 2 * span, center[1] - span],
        [center[0], center[1] + 2 * span],
    ])
    pts = np.vstack([P, super_pts])
    # triangles stored ccw; index >= n marks a super-triangle vertex
    triangles = {(n, n + 1, n + 2)}

    order = sorted(range(n), key=lambda i: (P[i, 0], P[i, 1]))
    for p in order:
        q = pts[p]
        bad = [t for t in triangles if incircle(pts[t[0]], pts[t[1]], pts[t[2]], q) > 0]
        # boundary of the cavity = edges belonging to exactly one bad triangle
        count: dict[tuple[int, int], int] = {}
        directed: dict[tuple[int, int], tuple[int, int]] = {}
        for t in bad:
            for u, w in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                key = (min(u, w), max(u, w))
                count[key] = count.get(key, 0) + 1
                directed[key] = (u, w)
        triangles.difference_update(bad)
        for key, c in count.items():
            if c == 1:
                u, w = directed[key]
                triangles.add((u, w, p))
    result = [t for t in triangles if max(t) < n]
    return sorted(tuple(_rotate_min(t)) for t in result)


def _rotate_min(t):
    k = t.index(min(t))
    return t[k:] + t[:k]


def delaunay(points) -> list[tuple[int, int]]:
    """Undirected Delaunay edges as sorted ``(i, j)`` pairs with ``i < j``.

    Raises
    ------
    DegenerateGeometryError
        Fewer than 3 points, duplicate points, or all points collinear.
    """
    P = _validate(points)
    for scale in (1e3, 1e5):
        tris = triangulate(P, super_scale=scale)
        if _covers_hull(P, tris):
            break
    edges = set()
    for a, b, c in tris:
        for u, w in ((a, b), (b, c), (c, a)):
            edges.add((min(u, w), max(u, w)))
    return sorted(edges)


def _hull_area(P) -> float:
    pts = sorted(map(tuple, P))
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and orient(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and orient(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return 0.5 * sum(orient(hull[0], hull[i], hull[i + 1]) for i in range(1, len(hull) - 1))


def _covers_hull(P, tris) -> bool:
    # a finite super-triangle can lose thin triangles along the hull
    area = 0.5 * sum(orient(P[a], P[b], P[c]) for a, b, c in tris)
    return abs(area - _hull_area(P)) <= 1e-9 * max(1.0, _hull_area(P))
