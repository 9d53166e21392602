"""Small geometric helpers shared across modules.

All simplices are given as (k+1, n) coordinate arrays (k-simplex embedded in
R^n, k <= n).
"""

from __future__ import annotations

import itertools

import numpy as np


def simplex_measure(pts: np.ndarray) -> float:
    """k-dimensional measure of a k-simplex embedded in R^n.

    Uses the Gram determinant, so it is valid for any embedding dimension
    (length of a segment in R^3, area of a triangle in R^4, ...).
    """
    pts = np.asarray(pts, dtype=float)
    k = pts.shape[0] - 1
    if k == 0:
        return 0.0
    edges = pts[1:] - pts[0]
    gram = edges @ edges.T
    det = np.linalg.det(gram)
    if det <= 0.0:
        return 0.0
    return float(np.sqrt(det) / np.prod(np.arange(1, k + 1)))


def simplex_diameter(pts: np.ndarray) -> float:
    """Longest edge of a simplex."""
    pts = np.asarray(pts, dtype=float)
    best = 0.0
    for i, j in itertools.combinations(range(pts.shape[0]), 2):
        best = max(best, float(np.linalg.norm(pts[i] - pts[j])))
    return best


def points_to_simplex_distance(points: np.ndarray, simplex: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance from each point to a 0/1/2-simplex.

    Parameters
    ----------
    points : (S, n) array
    simplex : (k+1, n) array with k in {0, 1, 2}

    Returns
    -------
    (S,) array of distances.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    simplex = np.asarray(simplex, dtype=float)
    k = simplex.shape[0] - 1
    if k == 0:
        return np.linalg.norm(points - simplex[0], axis=1)
    if k == 1:
        return _points_to_segment(points, simplex[0], simplex[1])
    if k == 2:
        return _points_to_triangle(points, simplex[0], simplex[1], simplex[2])
    raise ValueError(f"point-to-simplex distance implemented for k <= 2, got {k}")


def _points_to_segment(p, a, b):
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(p - a, axis=1)
    t = np.clip((p - a) @ ab / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(p - proj, axis=1)


def _points_to_triangle(p, a, b, c):
    # Project onto the triangle plane, clamp barycentrically by falling back
    # to the nearest edge when the projection lands outside.
    ab = b - a
    ac = c - a
    g00 = float(ab @ ab)
    g01 = float(ab @ ac)
    g11 = float(ac @ ac)
    det = g00 * g11 - g01 * g01
    if det <= 0.0:
        return np.minimum(
            _points_to_segment(p, a, b),
            np.minimum(_points_to_segment(p, b, c), _points_to_segment(p, a, c)),
        )
    ap = p - a
    d0 = ap @ ab
    d1 = ap @ ac
    s = (g11 * d0 - g01 * d1) / det
    t = (g00 * d1 - g01 * d0) / det
    inside = (s >= 0.0) & (t >= 0.0) & (s + t <= 1.0)
    proj = a + s[:, None] * ab + t[:, None] * ac
    dist = np.linalg.norm(p - proj, axis=1)
    if not np.all(inside):
        edge = np.minimum(
            _points_to_segment(p, a, b),
            np.minimum(_points_to_segment(p, b, c), _points_to_segment(p, a, c)),
        )
        dist = np.where(inside, dist, edge)
    return dist
