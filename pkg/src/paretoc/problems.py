"""Vector optimization problems with analytic gradients and Hessians.

Each registered problem is a :class:`VectorProblem` (or a
:class:`ConstrainedProblem` wrapping one) whose objective, Jacobian and
Hessian callables are hand-coded.  ``check_derivatives`` guards the hand-coded
derivatives against central finite differences.

Domain boxes for problems whose sources print no bounds are repo decisions,
chosen to contain the interesting critical structure with some margin; they
are documented in the README.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import UnknownProblem

Array = np.ndarray


@dataclass
class VectorProblem:
    """A smooth map u: R^n -> R^m with analytic derivatives.

    ``eval`` maps an n-vector to an m-vector, ``jacobian`` to the (m, n)
    matrix of gradients (rows), ``hessians`` to an (m, n, n) stack of
    symmetric matrices.  ``m <= n`` is the standard pipeline; ``m > n`` is
    accepted and flips :attr:`sigma_skip` (the singular set is the whole
    domain, so minor extraction is skipped downstream).
    """

    name: str
    n: int
    m: int
    eval: Callable[[Array], Array]
    jacobian: Callable[[Array], Array]
    hessians: Callable[[Array], Array]
    domain_box: Array
    description: str = ""
    # column subsets for the minor tests when the sliding windows are
    # structurally degenerate for this map (an identically-zero minor)
    minor_columns: Optional[tuple] = None

    def __post_init__(self):
        self.domain_box = np.asarray(self.domain_box, dtype=float).reshape(self.n, 2)

    @property
    def sigma_skip(self) -> bool:
        return self.m > self.n

    def u(self, x) -> Array:
        return np.asarray(self.eval(np.asarray(x, dtype=float)), dtype=float)

    def jac(self, x) -> Array:
        return np.asarray(self.jacobian(np.asarray(x, dtype=float)), dtype=float)

    def hess(self, x) -> Array:
        return np.asarray(self.hessians(np.asarray(x, dtype=float)), dtype=float)

    @property
    def box_diagonal(self) -> float:
        return float(np.linalg.norm(self.domain_box[:, 1] - self.domain_box[:, 0]))


@dataclass
class ConstrainedProblem:
    """Objectives over the zero set of an equality constraint g: R^n -> R^{n-d}."""

    base: VectorProblem
    g: Callable[[Array], Array]
    g_jacobian: Callable[[Array], Array]
    n_constraints: int = 1

    @property
    def name(self) -> str:
        return self.base.name

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def m(self) -> int:
        return self.base.m

    @property
    def d(self) -> int:
        return self.base.n - self.n_constraints

    def g_val(self, x) -> Array:
        return np.atleast_1d(np.asarray(self.g(np.asarray(x, dtype=float)), dtype=float))

    def g_jac(self, x) -> Array:
        j = np.asarray(self.g_jacobian(np.asarray(x, dtype=float)), dtype=float)
        return j.reshape(self.n_constraints, self.n)


# ---------------------------------------------------------------------------
# derivative checking
# ---------------------------------------------------------------------------


@dataclass
class DerivativeReport:
    problem: str
    h: float
    max_jacobian_error: float
    max_hessian_error: float
    max_constraint_error: float = 0.0
    tolerance: float = 1e-5
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        worst = max(
            self.max_jacobian_error, self.max_hessian_error, self.max_constraint_error
        )
        return worst < self.tolerance and not self.failures


def check_derivatives(
    problem: VectorProblem | ConstrainedProblem,
    samples: Sequence[Array],
    h: Optional[float] = None,
    tolerance: float = 1e-5,
) -> DerivativeReport:
    """Compare analytic Jacobians/Hessians against central finite differences.

    ``h`` defaults to 1e-4 times the domain-box diagonal.  Errors are relative
    to the larger of the matrix norm and 1.
    """
    cp = problem if isinstance(problem, ConstrainedProblem) else None
    p = cp.base if cp is not None else problem
    if h is None:
        h = 1e-4 * p.box_diagonal
    samples = [np.asarray(x, dtype=float) for x in samples]
    # errors are relative to the sample-set scale of each quantity, so stiff
    # maps are not penalized where a matrix entry happens to pass through zero
    jac_pairs = [(p.jac(x), _central_jacobian(p.u, x, h, p.m)) for x in samples]
    hess_pairs = [
        (
            p.hess(x),
            _central_jacobian(lambda y: p.jac(y).ravel(), x, h, p.m * p.n).reshape(
                p.m, p.n, p.n
            ),
        )
        for x in samples
    ]
    jac_scale = max(1.0, max(float(np.abs(J).max()) for J, _ in jac_pairs))
    hess_scale = max(1.0, max(float(np.abs(H).max()) for H, _ in hess_pairs))
    jac_err = 0.0
    hess_err = 0.0
    g_err = 0.0
    failures = []
    for x, (J, Jfd), (H, Hfd) in zip(samples, jac_pairs, hess_pairs):
        err = float(np.abs(J - Jfd).max()) / jac_scale
        jac_err = max(jac_err, err)
        if err >= tolerance:
            failures.append(("jacobian", x.tolist(), err))
        err = float(np.abs(H - Hfd).max()) / hess_scale
        hess_err = max(hess_err, err)
        if err >= tolerance:
            failures.append(("hessian", x.tolist(), err))
    if cp is not None:
        g_pairs = [
            (cp.g_jac(x), _central_jacobian(cp.g_val, x, h, cp.n_constraints))
            for x in samples
        ]
        g_scale = max(1.0, max(float(np.abs(G).max()) for G, _ in g_pairs))
        for x, (G, Gfd) in zip(samples, g_pairs):
            err = float(np.abs(G - Gfd).max()) / g_scale
            g_err = max(g_err, err)
            if err >= tolerance:
                failures.append(("constraint", x.tolist(), err))
    return DerivativeReport(
        problem=p.name,
        h=h,
        max_jacobian_error=jac_err,
        max_hessian_error=hess_err,
        max_constraint_error=g_err,
        tolerance=tolerance,
        failures=failures,
    )


def _central_jacobian(f, x, h, out_dim):
    n = len(x)
    J = np.empty((out_dim, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        J[:, i] = (np.atleast_1d(f(x + e)) - np.atleast_1d(f(x - e))) / (2 * h)
    return J


def sample_domain(problem: VectorProblem, count: int, seed: int = 0, shrink: float = 1e-3):
    """Uniform random samples inside the domain box, shrunk by a margin."""
    rng = np.random.default_rng(seed)
    lo = problem.domain_box[:, 0]
    hi = problem.domain_box[:, 1]
    pad = shrink * (hi - lo)
    return rng.uniform(lo + pad, hi - pad, size=(count, problem.n))


# ---------------------------------------------------------------------------
# registered problems
# ---------------------------------------------------------------------------


def _make_triv() -> VectorProblem:
    """Two negative definite quadratics; the stable set joins their maxima.

    u1 = -1.05 x^2 - 0.98 y^2
    u2 = -0.99 (x-3)^2 - 1.03 (y-2.5)^2
    """

    def ev(x):
        return np.array(
            [
                -1.05 * x[0] ** 2 - 0.98 * x[1] ** 2,
                -0.99 * (x[0] - 3.0) ** 2 - 1.03 * (x[1] - 2.5) ** 2,
            ]
        )

    def jac(x):
        return np.array(
            [
                [-2.10 * x[0], -1.96 * x[1]],
                [-1.98 * (x[0] - 3.0), -2.06 * (x[1] - 2.5)],
            ]
        )

    H = np.array([np.diag([-2.10, -1.96]), np.diag([-1.98, -2.06])])

    return VectorProblem(
        name="triv",
        n=2,
        m=2,
        eval=ev,
        jacobian=jac,
        hessians=lambda x: H,
        domain_box=[[-1.52, 4.48], [-1.52, 3.98]],
        description="two concave quadratics with maxima at (0,0) and (3,2.5)",
    )


def _make_smale() -> VectorProblem:
    """u1 = -y, u2 = (y - x^3)/(x + 1); cusp at the origin, pole at x = -1."""

    def ev(x):
        return np.array([-x[1], (x[1] - x[0] ** 3) / (x[0] + 1.0)])

    def jac(x):
        s = x[0] + 1.0
        du2x = (-2.0 * x[0] ** 3 - 3.0 * x[0] ** 2 - x[1]) / s**2
        return np.array([[0.0, -1.0], [du2x, 1.0 / s]])

    def hess(x):
        s = x[0] + 1.0
        h_xx = (-2.0 * x[0] ** 3 - 6.0 * x[0] ** 2 - 6.0 * x[0] + 2.0 * x[1]) / s**3
        h_xy = -1.0 / s**2
        return np.array(
            [
                np.zeros((2, 2)),
                [[h_xx, h_xy], [h_xy, 0.0]],
            ]
        )

    # box stays clear of the pole at x = -1 so finite differences of the
    # hand-coded derivatives remain trustworthy over the whole domain
    return VectorProblem(
        name="smale",
        n=2,
        m=2,
        eval=ev,
        jacobian=jac,
        hessians=hess,
        domain_box=[[-0.6, 1.0], [-5.2, 1.0]],
        description="rational map with one critical curve split by a cusp",
    )


def _make_sms() -> VectorProblem:
    """Concave quadratic against a saddle; two unbounded fronts, one cusp.

    u1 = -x^2 - y^2
    u2 = -(x-6)^2 + (y+0.3)^2
    """

    def ev(x):
        return np.array(
            [
                -x[0] ** 2 - x[1] ** 2,
                -((x[0] - 6.0) ** 2) + (x[1] + 0.3) ** 2,
            ]
        )

    def jac(x):
        return np.array(
            [
                [-2.0 * x[0], -2.0 * x[1]],
                [-2.0 * (x[0] - 6.0), 2.0 * (x[1] + 0.3)],
            ]
        )

    H = np.array([np.diag([-2.0, -2.0]), np.diag([-2.0, 2.0])])

    return VectorProblem(
        name="sms",
        n=2,
        m=2,
        eval=ev,
        jacobian=jac,
        hessians=lambda x: H,
        domain_box=[[-1.0, 7.0], [-4.0, 4.0]],
        description="concave quadratic vs saddle quadratic",
    )


def _make_noncv() -> VectorProblem:
    """Bimodal objective against a quadratic: unbounded branch plus two loops.

    u1 = -x^2 - y^2 - 4 (exp(-(x+2)^2 - y^2) + exp(-(x-2)^2 - y^2))
    u2 = -(x-6)^2 - (y+0.5)^2
    """

    def _bumps(x):
        e1 = np.exp(-((x[0] + 2.0) ** 2) - x[1] ** 2)
        e2 = np.exp(-((x[0] - 2.0) ** 2) - x[1] ** 2)
        return e1, e2

    def ev(x):
        e1, e2 = _bumps(x)
        return np.array(
            [
                -x[0] ** 2 - x[1] ** 2 - 4.0 * (e1 + e2),
                -((x[0] - 6.0) ** 2) - (x[1] + 0.5) ** 2,
            ]
        )

    def jac(x):
        e1, e2 = _bumps(x)
        du1x = -2.0 * x[0] + 8.0 * (x[0] + 2.0) * e1 + 8.0 * (x[0] - 2.0) * e2
        du1y = -2.0 * x[1] + 8.0 * x[1] * (e1 + e2)
        return np.array(
            [
                [du1x, du1y],
                [-2.0 * (x[0] - 6.0), -2.0 * (x[1] + 0.5)],
            ]
        )

    def hess(x):
        e1, e2 = _bumps(x)
        a1 = x[0] + 2.0
        a2 = x[0] - 2.0
        h_xx = -2.0 + 8.0 * e1 * (1.0 - 2.0 * a1**2) + 8.0 * e2 * (1.0 - 2.0 * a2**2)
        h_xy = -16.0 * x[1] * (a1 * e1 + a2 * e2)
        h_yy = -2.0 + 8.0 * (e1 + e2) * (1.0 - 2.0 * x[1] ** 2)
        H1 = np.array([[h_xx, h_xy], [h_xy, h_yy]])
        H2 = np.diag([-2.0, -2.0])
        return np.array([H1, H2])

    return VectorProblem(
        name="noncv",
        n=2,
        m=2,
        eval=ev,
        jacobian=jac,
        hessians=hess,
        domain_box=[[-4.5, 8.0], [-3.0, 3.0]],
        description="bimodal objective vs quadratic: critical loop between two cusps",
    )


def _make_locglob() -> VectorProblem:
    """3-D map with a broad optimal branch surpassed locally by a sharp one.

    f is a sum of two anisotropic Gaussian bumps (the second with the third
    coordinate halved inside the bump), and the objectives are the 45-degree
    rotation of (x, f):

        g(X; M, p, s) = sqrt(2 pi / s) * exp(((X-p)^T M (X-p)) / s^2)
        f(X) = g(X; M, p0, 0.35) + g((x, y, z/2); M, p1, 3.0)
        u1 = (sqrt(2)/2) (x + f),  u2 = (sqrt(2)/2) (-x + f)
    """
    M = np.array(
        [
            [-1.0, -0.03, 0.011],
            [-0.03, -1.0, 0.07],
            [0.011, 0.07, -1.01],
        ]
    )
    p0 = np.array([0.0, 0.15, 0.0])
    p1 = np.array([0.0, -1.1, 0.0])
    s0 = 0.35
    s1 = 3.0
    S = np.diag([1.0, 1.0, 0.5])
    c = np.sqrt(2.0) / 2.0
    e1 = np.array([1.0, 0.0, 0.0])

    def _bump(y, p, s):
        d = y - p
        q = float(d @ M @ d)
        amp = np.sqrt(2.0 * np.pi / s)
        val = amp * np.exp(q / s**2)
        grad = val * (2.0 * M @ d) / s**2
        hess = val * (
            np.outer(2.0 * M @ d, 2.0 * M @ d) / s**4 + 2.0 * M / s**2
        )
        return val, grad, hess

    def _f(x):
        v0, g0, h0 = _bump(x, p0, s0)
        v1, g1, h1 = _bump(S @ x, p1, s1)
        return v0 + v1, g0 + S @ g1, h0 + S @ h1 @ S

    def ev(x):
        f, _, _ = _f(x)
        return np.array([c * (x[0] + f), c * (-x[0] + f)])

    def jac(x):
        _, g, _ = _f(x)
        return np.array([c * (e1 + g), c * (-e1 + g)])

    def hess(x):
        _, _, h = _f(x)
        return np.array([c * h, c * h])

    # both rows share the last two components (c*grad f), so the (1,2)-column
    # minor vanishes identically; pair column 0 with each other column instead
    return VectorProblem(
        name="locglob",
        n=3,
        m=2,
        eval=ev,
        jacobian=jac,
        hessians=hess,
        domain_box=[[-1.0, 1.0], [-2.0, 2.0], [-1.0, 1.0]],
        description="broad and sharp optimal branches superposed in 3-D",
        minor_columns=((0, 1), (0, 2)),
    )


def _make_zdt3reg() -> VectorProblem:
    """Regularized 6-D ZDT3 variant (best-effort demo; not an acceptance gate).

    u1 = x1
    u2 = 1 - sqrt(x1) - x1 sin(10 pi x1) + x2^2 + ... + x6^2
    """

    def ev(x):
        tail = float((x[1:] ** 2).sum())
        return np.array(
            [
                x[0],
                1.0 - np.sqrt(x[0]) - x[0] * np.sin(10.0 * np.pi * x[0]) + tail,
            ]
        )

    def jac(x):
        w = 10.0 * np.pi
        J = np.zeros((2, 6))
        J[0, 0] = 1.0
        J[1, 0] = -0.5 / np.sqrt(x[0]) - np.sin(w * x[0]) - w * x[0] * np.cos(w * x[0])
        J[1, 1:] = 2.0 * x[1:]
        return J

    def hess(x):
        w = 10.0 * np.pi
        H = np.zeros((2, 6, 6))
        H[1, 0, 0] = (
            0.25 * x[0] ** -1.5
            - 2.0 * w * np.cos(w * x[0])
            + w**2 * x[0] * np.sin(w * x[0])
        )
        for i in range(1, 6):
            H[1, i, i] = 2.0
        return H

    box = [[0.1, 0.425]] + [[-0.16, 0.16]] * 5
    # the first objective depends on x1 only, so every window that skips
    # column 0 has a zero row; pair column 0 with each remaining column
    return VectorProblem(
        name="zdt3reg",
        n=6,
        m=2,
        eval=ev,
        jacobian=jac,
        hessians=hess,
        domain_box=box,
        description="regularized ZDT3 in 6-D (demo)",
        minor_columns=tuple((0, j) for j in range(1, 6)),
    )


# Coefficients for the three-objective quadratic examples are repo choices
# (the source prints the template only): maxima at the unit points, mild
# anisotropy, small trigonometric perturbation.
_TRI_C = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
_TRI_ALPHA = np.array(
    [[1.0, 1.15, 1.1], [1.1, 1.0, 1.15], [1.15, 1.1, 1.0]]
)
_TRI_BETA2, _TRI_GAMMA2 = 0.05, 2.0
_TRI_BETA3, _TRI_GAMMA3 = 0.05, 2.5
# extra bump for the nonconvex variant
_TRI_C4 = np.array([1.1, 1.1, 0.2])
_TRI_ALPHA4 = np.array([6.0, 6.0, 6.0])
_TRI_BETA1, _TRI_GAMMA1 = 3.0, 1.0


def _tri_quadratic_parts(x):
    f = np.empty(3)
    grads = np.empty((3, 3))
    hesss = np.empty((3, 3, 3))
    for j in range(3):
        d = x - _TRI_C[j]
        a = _TRI_ALPHA[j]
        f[j] = -float((a * d * d).sum())
        grads[j] = -2.0 * a * d
        hesss[j] = np.diag(-2.0 * a)
    return f, grads, hesss


def _tri_trig_parts(x):
    k2 = np.pi / _TRI_GAMMA2
    k3 = np.pi / _TRI_GAMMA3
    s = x[0] + x[1]
    dsum = np.array([1.0, 1.0, 0.0])
    t = x[0] - x[1]
    ddiff = np.array([1.0, -1.0, 0.0])
    v2 = _TRI_BETA2 * np.sin(k2 * s)
    g2 = _TRI_BETA2 * k2 * np.cos(k2 * s) * dsum
    h2 = -_TRI_BETA2 * k2**2 * np.sin(k2 * s) * np.outer(dsum, dsum)
    v3 = _TRI_BETA3 * np.cos(k3 * t)
    g3 = -_TRI_BETA3 * k3 * np.sin(k3 * t) * ddiff
    h3 = -_TRI_BETA3 * k3**2 * np.cos(k3 * t) * np.outer(ddiff, ddiff)
    return (v2, g2, h2), (v3, g3, h3)


def _make_tri_quadratic() -> VectorProblem:
    """Three concave quadratics plus a small trigonometric perturbation.

    The critical set is a stable triangle-like patch whose three corners are
    the individual maxima.
    """

    def ev(x):
        f, _, _ = _tri_quadratic_parts(x)
        (v2, _, _), (v3, _, _) = _tri_trig_parts(x)
        return f + np.array([0.0, v2, v3])

    def jac(x):
        _, g, _ = _tri_quadratic_parts(x)
        (_, g2, _), (_, g3, _) = _tri_trig_parts(x)
        g[1] += g2
        g[2] += g3
        return g

    def hess(x):
        _, _, h = _tri_quadratic_parts(x)
        (_, _, h2), (_, _, h3) = _tri_trig_parts(x)
        h[1] += h2
        h[2] += h3
        return h

    return VectorProblem(
        name="tri_quadratic",
        n=3,
        m=3,
        eval=ev,
        jacobian=jac,
        hessians=hess,
        domain_box=[[-1.0, 2.0]] * 3,
        description="three concave quadratics; stable triangular patch",
    )


def _make_tri_quadratic_ncv() -> VectorProblem:
    """Nonconvex variant: a sharp exponential bump adds a secondary branch."""

    def _bump(x):
        d = x - _TRI_C4
        f4 = -float((_TRI_ALPHA4 * d * d).sum())
        g4 = -2.0 * _TRI_ALPHA4 * d
        h4 = np.diag(-2.0 * _TRI_ALPHA4)
        e = np.exp(f4 / _TRI_GAMMA1)
        val = _TRI_BETA1 * e
        grad = val * g4 / _TRI_GAMMA1
        hess = val * (np.outer(g4, g4) / _TRI_GAMMA1**2 + h4 / _TRI_GAMMA1)
        return val, grad, hess

    base = _make_tri_quadratic()

    def ev(x):
        v, _, _ = _bump(x)
        out = base.eval(x).copy()
        out[0] += v
        return out

    def jac(x):
        _, g, _ = _bump(x)
        out = base.jacobian(x).copy()
        out[0] += g
        return out

    def hess(x):
        _, _, h = _bump(x)
        out = base.hessians(x).copy()
        out[0] = out[0] + h
        return out

    return VectorProblem(
        name="tri_quadratic_ncv",
        n=3,
        m=3,
        eval=ev,
        jacobian=jac,
        hessians=hess,
        domain_box=[[-1.0, 2.0]] * 3,
        description="tri_quadratic with a secondary maximum of the first objective",
    )


def _make_sphere_proj() -> ConstrainedProblem:
    """Coordinate projections on the unit sphere: u = (x1, x2), g = (|x|^2-1)/2."""

    def ev(x):
        return np.array([x[0], x[1]])

    J = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    H = np.zeros((2, 3, 3))

    base = VectorProblem(
        name="sphere_proj",
        n=3,
        m=2,
        eval=ev,
        jacobian=lambda x: J,
        hessians=lambda x: H,
        domain_box=[[-1.0, 1.0]] * 3,
        description="first two coordinates restricted to the unit sphere",
    )

    return ConstrainedProblem(
        base=base,
        g=lambda x: 0.5 * (float(x @ x) - 1.0),
        g_jacobian=lambda x: x.copy(),
        n_constraints=1,
    )


_REGISTRY: dict[str, Callable] = {
    "triv": _make_triv,
    "smale": _make_smale,
    "sms": _make_sms,
    "noncv": _make_noncv,
    "locglob": _make_locglob,
    "zdt3reg": _make_zdt3reg,
    "tri_quadratic": _make_tri_quadratic,
    "tri_quadratic_ncv": _make_tri_quadratic_ncv,
    "sphere_proj": _make_sphere_proj,
}


def registry_names() -> list[str]:
    return sorted(_REGISTRY)


def registry_get(name: str) -> VectorProblem | ConstrainedProblem:
    """Fetch a registered problem by name; raises UnknownProblem otherwise."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise UnknownProblem(
            f"unknown problem {name!r}; available: {', '.join(registry_names())}"
        ) from None
    return factory()
