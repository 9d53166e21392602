import numpy as np
import pytest

from paretoc.constrained import (
    ManifoldMesh,
    analyze_constrained,
    augmented_minors,
    icosphere,
    project_gradients,
)
from paretoc.continuation import STRATUM_UNSTABLE
from paretoc.errors import NonSquareUnsupported, RankDeficientConstraint
from paretoc.geometry import points_to_simplex_distance
from paretoc.problems import ConstrainedProblem, VectorProblem, registry_get


@pytest.fixture(scope="module")
def sphere():
    return registry_get("sphere_proj")


def _analytic_arcs(samples=600):
    phi = np.linspace(0.0, np.pi / 2, samples)
    quad1 = np.column_stack([np.cos(phi), np.sin(phi), np.zeros_like(phi)])
    return np.vstack([quad1, -quad1])


def _critical_distance_to_arcs(cx):
    arcs = _analytic_arcs()
    ids = cx.simplex_ids([STRATUM_UNSTABLE])
    d_arc_to_theta = np.full(len(arcs), np.inf)
    for i in ids:
        sid = cx.simplices[i][0]
        d_arc_to_theta = np.minimum(
            d_arc_to_theta, points_to_simplex_distance(arcs, cx.positions[list(sid)])
        )
    vids = sorted({v for i in ids for v in cx.simplices[i][0]})
    d_theta_to_arc = np.array(
        [np.linalg.norm(arcs - cx.positions[v], axis=1).min() for v in vids]
    )
    return max(float(d_arc_to_theta.max()), float(d_theta_to_arc.max()))


# ---------------------------------------------------------------------------
# pointwise operations
# ---------------------------------------------------------------------------


def test_project_gradients_pole_of_first_objective(sphere):
    pg = project_gradients(sphere, [1.0, 0.0, 0.0])
    assert pg[0] == pytest.approx([0.0, 0.0, 0.0], abs=1e-14)


def test_project_gradients_already_tangent(sphere):
    pg = project_gradients(sphere, [0.0, 0.0, 1.0])
    assert pg == pytest.approx(np.array([[1.0, 0, 0], [0, 1.0, 0]]), abs=1e-14)


def test_project_gradients_closed_form(sphere, rng):
    # projections are (1 - x1^2, -x1 x2, -x1 x3) and (-x1 x2, 1 - x2^2, -x2 x3)
    for _ in range(20):
        x = rng.normal(size=3)
        x /= np.linalg.norm(x)
        pg = project_gradients(sphere, x)
        expected = np.array(
            [
                [1 - x[0] ** 2, -x[0] * x[1], -x[0] * x[2]],
                [-x[0] * x[1], 1 - x[1] ** 2, -x[1] * x[2]],
            ]
        )
        assert pg == pytest.approx(expected, abs=1e-12)
        assert np.abs(pg @ sphere.g_jac(x).T).max() < 1e-10


def test_augmented_minors_closed_form(sphere, rng):
    assert augmented_minors(sphere, [0.0, 0.0, 1.0]) == pytest.approx(1.0)
    eq = [np.sqrt(0.5), np.sqrt(0.5), 0.0]
    assert augmented_minors(sphere, eq) == pytest.approx(0.0, abs=1e-15)
    for _ in range(20):
        x = rng.normal(size=3)
        x /= np.linalg.norm(x)
        assert augmented_minors(sphere, x) == pytest.approx(x[2], abs=1e-14)


def test_steps_6_and_7_equivalent(sphere):
    # the sign of the stacked determinant matches the orientation of the
    # projected gradient pair in an oriented tangent frame, at every node
    mesh = icosphere(1)
    for x in mesh.points:
        g = sphere.g_jac(x)[0]
        ghat = g / np.linalg.norm(g)
        # oriented tangent frame: det[t1, t2, ghat] > 0
        t1 = np.cross(ghat, [0.0, 0.0, 1.0])
        if np.linalg.norm(t1) < 1e-8:
            t1 = np.cross(ghat, [0.0, 1.0, 0.0])
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(ghat, t1)
        if np.linalg.det(np.column_stack([t1, t2, ghat])) < 0:
            t2 = -t2
        pg = project_gradients(sphere, x)
        frame_det = (pg[0] @ t1) * (pg[1] @ t2) - (pg[0] @ t2) * (pg[1] @ t1)
        aug = augmented_minors(sphere, x)
        if abs(aug) > 1e-12:
            assert np.sign(frame_det) == np.sign(aug)


def test_rank_deficient_constraint():
    bad = ConstrainedProblem(
        base=registry_get("sphere_proj").base,
        g=lambda x: 0.0,
        g_jacobian=lambda x: np.zeros(3),
        n_constraints=1,
    )
    with pytest.raises(RankDeficientConstraint):
        project_gradients(bad, [1.0, 0.0, 0.0])


def test_non_square_unsupported(sphere):
    cp = ConstrainedProblem(
        base=sphere.base,
        g=lambda x: np.array([0.0, 0.0]),
        g_jacobian=lambda x: np.eye(2, 3),
        n_constraints=2,
    )
    with pytest.raises(NonSquareUnsupported):
        augmented_minors(cp, [0.0, 0.0, 1.0])


# ---------------------------------------------------------------------------
# meshes
# ---------------------------------------------------------------------------


def test_icosphere_counts_and_norms():
    for sub, (nv, nf) in enumerate([(12, 20), (42, 80), (162, 320)]):
        mesh = icosphere(sub)
        assert (len(mesh.points), len(mesh.cells)) == (nv, nf)
        assert np.allclose(np.linalg.norm(mesh.points, axis=1), 1.0, atol=1e-12)


def test_manifold_mesh_validation(sphere):
    mesh = icosphere(0)
    mesh.validate(sphere)
    assert mesh.node_constraint_residual.max() < 1e-12
    bad = ManifoldMesh(points=mesh.points * 1.01, cells=mesh.cells, d=2)
    with pytest.raises(ValueError):
        bad.validate(sphere)


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------


def test_icosahedron_equator_polyline(sphere):
    cx = analyze_constrained(sphere, icosphere(0))
    comps = cx.components()
    assert len(comps) == 1
    degrees: dict[int, int] = {}
    for ids, _, _ in cx.simplices:
        for v in ids:
            degrees[v] = degrees.get(v, 0) + 1
    assert set(degrees.values()) == {2}  # closed polyline
    arcs = cx.components(strata=[STRATUM_UNSTABLE])
    assert len(arcs) == 2
    for comp in arcs:
        pos = cx.positions[list(comp)]
        assert np.all(pos[:, 0] * pos[:, 1] > -1e-9)


def test_opposed_identical_objectives_degenerate(sphere, caplog):
    cp = ConstrainedProblem(
        base=VectorProblem(
            name="xminusx", n=3, m=2,
            eval=lambda x: np.array([x[0], -x[0]]),
            jacobian=lambda x: np.array([[1.0, 0, 0], [-1.0, 0, 0]]),
            hessians=lambda x: np.zeros((2, 3, 3)),
            domain_box=[[-1, 1]] * 3,
        ),
        g=sphere.g,
        g_jacobian=sphere.g_jacobian,
        n_constraints=1,
    )
    cx = analyze_constrained(cp, icosphere(1))
    # the stacked determinant vanishes identically: every face system is
    # degenerate, nothing is extracted
    assert cx.is_empty()


def test_subdivision_convergence_superlinear(sphere):
    dists = []
    for sub in (0, 1, 2):
        cx = analyze_constrained(sphere, icosphere(sub))
        dists.append(_critical_distance_to_arcs(cx))
    # halving the edge length should cut the distance by clearly more than 2
    assert dists[1] < dists[0] / 2.5
    assert dists[2] < dists[1] / 2.5


def test_twice_subdivided_distance_bound(sphere):
    cx = analyze_constrained(sphere, icosphere(2))
    assert _critical_distance_to_arcs(cx) < 0.05


def test_arc_endpoints_converge_to_axis_crossings(sphere):
    axes = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]], dtype=float)
    prev = None
    for sub in (1, 2, 3):
        cx = analyze_constrained(sphere, icosphere(sub))
        bnd = cx.markers_of_kind("criticality_boundary")
        assert len(bnd) == 4
        worst = max(
            float(np.linalg.norm(axes - cx.positions[v], axis=1).min()) for v in bnd
        )
        if prev is not None:
            assert worst < prev / 2.0  # superlinear shrink per subdivision
        prev = worst
    assert prev < 0.01
