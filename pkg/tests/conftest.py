"""Shared oracles for the test suite.

These deliberately re-derive geometry from first principles (lifted
least-squares circumspheres, scipy's qhull wrapper, brute-force scans) so
they stay independent of the library's own predicate implementations.
"""

import numpy as np
import pytest


def pytest_addoption(parser):
    parser.addoption(
        "--run-6d",
        action="store_true",
        default=False,
        help="run the 6-D demo problem (slow, best-effort)",
    )


def circumsphere(pts):
    """Circumcenter and radius of a full-dimensional simplex (oracle)."""
    pts = np.asarray(pts, dtype=float)
    A = 2.0 * (pts[1:] - pts[0])
    b = (pts[1:] ** 2).sum(axis=1) - (pts[0] ** 2).sum()
    c = np.linalg.solve(A, b)
    return c, float(np.linalg.norm(pts[0] - c))


def brute_delaunay_violation(tess):
    """Worst 'inside-circumsphere' margin over every (cell, node) pair.

    Negative or ~0 means the tessellation is Delaunay (up to cospherical
    ties); clearly positive means a violation.
    """
    pts = tess.nodes.points
    worst = -np.inf
    for cell in tess.cells:
        c, r = circumsphere(pts[list(cell)])
        d = np.linalg.norm(pts - c, axis=1)
        mask = np.ones(len(pts), dtype=bool)
        mask[list(cell)] = False
        if mask.any():
            worst = max(worst, float((r - d[mask]).max() / max(r, 1e-300)))
    return worst


def scipy_delaunay_cells(pts):
    from scipy.spatial import Delaunay

    return sorted(tuple(sorted(int(i) for i in s)) for s in Delaunay(pts).simplices)


def simplex_volume(pts):
    pts = np.asarray(pts, dtype=float)
    n = pts.shape[1]
    edges = pts[1:] - pts[0]
    return abs(float(np.linalg.det(edges))) / np.prod(np.arange(1, n + 1))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
