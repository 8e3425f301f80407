"""Small 2-D convex-hull utilities for region traces."""

from __future__ import annotations

import numpy as np


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; returns hull vertices in CCW order."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if pts.shape[0] <= 2:
        return pts

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= 0.0:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return np.asarray(lower[:-1] + upper[:-1])


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.hypot(*(p - a)))
    t = float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    proj = a + t * ab
    return float(np.hypot(*(p - proj)))


def distance_to_hull_boundary(point: np.ndarray, hull: np.ndarray) -> float:
    """Distance from a point to the closed polyline of hull vertices."""
    if hull.shape[0] == 1:
        return float(np.hypot(*(point - hull[0])))
    d = np.inf
    for i in range(hull.shape[0]):
        a = hull[i]
        b = hull[(i + 1) % hull.shape[0]]
        d = min(d, _point_segment_distance(np.asarray(point, float), a, b))
    return d


def point_in_hull(point: np.ndarray, hull: np.ndarray, tol: float = 0.0) -> bool:
    """Membership in the convex polygon (CCW hull vertices), with tolerance.

    A point within `tol` outside an edge still counts as inside.
    """
    if hull.shape[0] == 1:
        return distance_to_hull_boundary(point, hull) <= tol
    if hull.shape[0] == 2:
        return distance_to_hull_boundary(point, hull) <= tol
    p = np.asarray(point, dtype=float)
    for i in range(hull.shape[0]):
        a = hull[i]
        b = hull[(i + 1) % hull.shape[0]]
        edge = b - a
        norm = float(np.hypot(*edge))
        if norm == 0.0:
            continue
        cross = (edge[0] * (p[1] - a[1]) - edge[1] * (p[0] - a[0])) / norm
        if cross < -tol:
            return False
    return True


def max_interior_depth(points: np.ndarray, tol_dedup: float = 0.0) -> float:
    """Largest distance by which any point sits strictly inside the hull of the set.

    Zero means every point lies on (or numerically at) the hull boundary, as a
    boundary trace of a convex region should.
    """
    pts = np.asarray(points, dtype=float)
    hull = convex_hull(pts)
    worst = 0.0
    for p in pts:
        d = distance_to_hull_boundary(p, hull)
        if point_in_hull(p, hull) and d > worst:
            worst = d
    return worst
