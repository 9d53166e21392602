import numpy as np
import pytest

from paretoc.errors import UnknownProblem
from paretoc.problems import (
    ConstrainedProblem,
    VectorProblem,
    check_derivatives,
    registry_get,
    registry_names,
    sample_domain,
)

ALL_NAMES = [
    "triv", "smale", "sms", "noncv", "locglob",
    "zdt3reg", "tri_quadratic", "tri_quadratic_ncv", "sphere_proj",
]


def _samples_for(problem, count=20, seed=11):
    base = problem.base if isinstance(problem, ConstrainedProblem) else problem
    s = sample_domain(base, count, seed=seed)
    if isinstance(problem, ConstrainedProblem):
        s = s / np.linalg.norm(s, axis=1, keepdims=True)
    return s


def test_registry_complete():
    assert registry_names() == sorted(ALL_NAMES)
    with pytest.raises(UnknownProblem):
        registry_get("nope")


@pytest.mark.parametrize("name", ALL_NAMES)
def test_all_registered_problems_pass_derivative_check(name):
    problem = registry_get(name)
    report = check_derivatives(problem, _samples_for(problem))
    assert report.passed, report.failures[:3]


@pytest.mark.parametrize("name", ALL_NAMES)
def test_hessians_symmetric(name):
    problem = registry_get(name)
    base = problem.base if isinstance(problem, ConstrainedProblem) else problem
    for x in _samples_for(problem, count=10):
        H = base.hess(x)
        assert np.abs(H - np.transpose(H, (0, 2, 1))).max() < 1e-10


def test_wrong_gradient_sign_fails():
    bad = VectorProblem(
        name="bad", n=2, m=2,
        eval=lambda x: np.array([x[0] ** 2, x[1] ** 2]),
        jacobian=lambda x: np.array([[-2 * x[0], 0.0], [0.0, 2 * x[1]]]),
        hessians=lambda x: np.array([np.diag([2.0, 0.0]), np.diag([0.0, 2.0])]),
        domain_box=[[-1, 1], [-1, 1]],
    )
    report = check_derivatives(bad, sample_domain(bad, 20, seed=3))
    assert not report.passed
    assert any(kind == "jacobian" for kind, _, _ in report.failures)


def test_triv_anchor_values():
    p = registry_get("triv")
    assert p.u([0.0, 0.0])[0] == 0.0
    assert p.u([3.0, 2.5])[1] == 0.0
    assert np.allclose(p.jac([0.7, -0.3])[0], [-2.1 * 0.7, -1.96 * -0.3])


def test_smale_constant_first_gradient():
    p = registry_get("smale")
    for x in sample_domain(p, 5, seed=1):
        assert np.allclose(p.jac(x)[0], [0.0, -1.0])


def test_sphere_constraint_jacobian_anchor():
    cp = registry_get("sphere_proj")
    assert np.allclose(cp.g_jac(np.array([1.0, 0.0, 0.0])), [[1.0, 0.0, 0.0]])
    assert cp.g_val(np.array([1.0, 0.0, 0.0]))[0] == pytest.approx(0.0, abs=1e-15)
    report = check_derivatives(cp, _samples_for(cp))
    assert report.passed and report.max_constraint_error < 1e-5


def test_zdt3reg_domain_box_exact():
    p = registry_get("zdt3reg")
    assert p.n == 6 and p.m == 2
    assert np.allclose(p.domain_box[0], [0.1, 0.425])
    for i in range(1, 6):
        assert np.allclose(p.domain_box[i], [-0.16, 0.16])


def test_m_le_n_flags():
    assert not registry_get("triv").sigma_skip
    toy = VectorProblem(
        name="toy", n=1, m=2,
        eval=lambda x: np.array([x[0], -x[0]]),
        jacobian=lambda x: np.array([[1.0], [-1.0]]),
        hessians=lambda x: np.zeros((2, 1, 1)),
        domain_box=[[-1, 1]],
    )
    assert toy.sigma_skip


def test_tri_quadratic_maxima_distinct_noncollinear():
    p = registry_get("tri_quadratic")
    # the three maxima sit near the unit points; check non-collinearity
    C = np.eye(3)
    v1, v2 = C[1] - C[0], C[2] - C[0]
    assert np.linalg.norm(np.cross(v1, v2)) > 0.5
    # gradient roughly vanishes near each unperturbed maximum
    for j in range(3):
        assert np.linalg.norm(p.jac(C[j])[j]) < 0.2
