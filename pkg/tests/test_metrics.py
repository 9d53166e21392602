import numpy as np
import pytest

from paretoc.errors import EmptyComplex, InsufficientData
from paretoc.metrics import convergence_slope, hausdorff, max_sample_spacing


def _segments(points, segs):
    return (np.asarray(points, dtype=float), [tuple(s) for s in segs])


def test_identity_zero():
    A = _segments([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]], [(0, 1), (1, 2)])
    rep = hausdorff(A, A)
    assert rep.hausdorff < 1e-12
    assert rep.mean_a_to_b < 1e-12


def test_point_to_point():
    rep = hausdorff(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]]))
    assert rep.hausdorff == pytest.approx(5.0)
    assert rep.mean_a_to_b == pytest.approx(5.0)
    assert rep.mean_b_to_a == pytest.approx(5.0)


def test_segment_vs_point_frozen():
    # A = segment (0,0)-(1,0), B = point (0.5,2): sup over A at the endpoints
    # gives sqrt(0.25 + 4), the B side gives 2; hausdorff = sqrt(4.25)
    A = _segments([[0.0, 0.0], [1.0, 0.0]], [(0, 1)])
    B = np.array([[0.5, 2.0]])
    rep = hausdorff(A, B, density=64)
    assert rep.hausdorff == pytest.approx(np.sqrt(4.25), abs=1e-9)
    assert rep.mean_b_to_a == pytest.approx(2.0)


def test_symmetry(rng):
    pts_a = rng.uniform(-1, 1, (7, 2))
    pts_b = rng.uniform(-1, 1, (6, 2))
    A = _segments(pts_a, [(i, i + 1) for i in range(6)])
    B = _segments(pts_b, [(i, i + 1) for i in range(5)])
    r1 = hausdorff(A, B)
    r2 = hausdorff(B, A)
    assert r1.hausdorff == pytest.approx(r2.hausdorff)
    assert r1.mean_a_to_b == pytest.approx(r2.mean_b_to_a)


def test_report_ordering_invariant(rng):
    pts_a = rng.uniform(-1, 1, (5, 3))
    pts_b = rng.uniform(-1, 1, (5, 3))
    rep = hausdorff(pts_a, pts_b)
    assert rep.hausdorff >= max(rep.mean_a_to_b, rep.mean_b_to_a) >= 0.0


def test_triangle_inequality_within_sampling(rng):
    sets = []
    for _ in range(3):
        pts = rng.uniform(-1, 1, (6, 2))
        sets.append(_segments(pts, [(i, i + 1) for i in range(5)]))
    d = lambda X, Y: hausdorff(X, Y, density=50).hausdorff
    slack = 2 * max(max_sample_spacing(s, density=50) for s in sets)
    assert d(sets[0], sets[2]) <= d(sets[0], sets[1]) + d(sets[1], sets[2]) + slack


def test_density_refinement_bound(rng):
    pts_a = rng.uniform(-1, 1, (6, 2))
    pts_b = rng.uniform(-1, 1, (6, 2))
    A = _segments(pts_a, [(i, i + 1) for i in range(5)])
    B = _segments(pts_b, [(i, i + 1) for i in range(5)])
    r1 = hausdorff(A, B, density=20)
    r2 = hausdorff(A, B, density=40)
    bound = max(max_sample_spacing(A, density=20), max_sample_spacing(B, density=20))
    assert abs(r1.hausdorff - r2.hausdorff) <= bound


def test_triangles_supported():
    A = (np.array([[0.0, 0, 0], [1.0, 0, 0], [0.0, 1, 0]]), [(0, 1, 2)])
    B = np.array([[0.0, 0.0, 1.0]])
    rep = hausdorff(A, B, density=30)
    assert rep.hausdorff == pytest.approx(np.sqrt(2.0), abs=1e-6)


def test_empty_complex_error():
    with pytest.raises(EmptyComplex):
        hausdorff((np.zeros((0, 2)), []), np.array([[0.0, 0.0]]))


def test_convergence_slope_exact():
    deltas = [0.5, 0.25, 0.125]
    assert convergence_slope([(d, d**2) for d in deltas]) == pytest.approx(2.0)
    assert convergence_slope([(d, d) for d in deltas]) == pytest.approx(1.0)


def test_convergence_slope_errors():
    with pytest.raises(InsufficientData):
        convergence_slope([(0.5, 0.25), (0.25, 0.06)])
    with pytest.raises(InsufficientData):
        convergence_slope([(0.5, 0.0), (0.25, 0.1), (0.125, 0.2)])
