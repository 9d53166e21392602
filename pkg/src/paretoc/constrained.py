"""First-order continuation on an equality-constrained manifold W = {g = 0}.

The manifold is supplied as a piecewise-linear mesh of d-simplices embedded in
R^n.  At every node the objective gradients are projected onto ker Dg, and the
singular set is located through the determinant of the stacked matrix
(grad g_1, ..., grad g_{n-d}, grad u_1, ..., grad u_m) -- equivalently, the
orientation change of the projected gradient frame.  Only the square case
n - d + m = n (one scalar test per node) is implemented; it covers one
constraint with d = m, e.g. two objectives on a surface in R^3.

The pipeline is first order: the critical sub-polytope is extracted exactly as
in the unconstrained case but no stability clip is applied, so critical pieces
carry the ``critical_unstable`` label (stability undecided).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .continuation import (
    CellAnalysis,
    MARKER_BOUNDARY,
    Piece,
    ParetoComplex,
    STRATUM_SINGULAR,
    STRATUM_UNSTABLE,
    SingularVertex,
    clip_polytope,
    glue,
    snap_determinant,
    solve_lambda,
    EPS_RANK,
    EPS_RES,
)
from .errors import (
    NonSquareUnsupported,
    RankCollapse,
    RankDeficientConstraint,
    UnsupportedObjectiveCount,
)
from .problems import ConstrainedProblem
from .tessellation import NodeSet, Tessellation

logger = logging.getLogger(__name__)

EPS_CONSTRAINT = 1e-8  # max |g| allowed on mesh nodes


@dataclass
class ManifoldMesh:
    """d-dimensional simplicial mesh embedded in R^n approximating {g = 0}."""

    points: np.ndarray
    cells: list
    d: int
    node_constraint_residual: np.ndarray = field(default=None)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.cells = [tuple(sorted(int(i) for i in c)) for c in self.cells]
        for c in self.cells:
            if len(c) != self.d + 1:
                raise ValueError(f"cell {c} is not a {self.d}-simplex")

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def validate(self, cp: ConstrainedProblem, eps: float = EPS_CONSTRAINT) -> None:
        res = np.array([np.abs(cp.g_val(p)).max() for p in self.points])
        self.node_constraint_residual = res
        worst = float(res.max()) if res.size else 0.0
        if worst >= eps:
            raise ValueError(
                f"mesh node violates the constraint: max |g| = {worst:g} >= {eps:g}"
            )

    def as_tessellation(self) -> Tessellation:
        return Tessellation(NodeSet(self.points), self.cells)


def project_gradients(cp: ConstrainedProblem, x) -> np.ndarray:
    """Objective gradients projected onto ker Dg(x): rows (I - Dg+ Dg) grad u_j."""
    x = np.asarray(x, dtype=float)
    Dg = cp.g_jac(x)
    gram = Dg @ Dg.T
    sv = np.linalg.svd(Dg, compute_uv=False)
    if sv[-1] <= EPS_RANK * max(sv[0], 1e-300):
        raise RankDeficientConstraint(f"Dg rank deficient at {x}")
    J = cp.base.jac(x)
    corr = Dg.T @ np.linalg.solve(gram, Dg @ J.T)
    return J - corr.T


def augmented_minors(cp: ConstrainedProblem, x) -> float:
    """det(grad g_1, ..., grad g_{n-d}, grad u_1, ..., grad u_m); square case only."""
    k = cp.n_constraints
    if k + cp.m != cp.n:
        raise NonSquareUnsupported(
            f"stacked matrix is {cp.n} x {k + cp.m}; only the square case is supported"
        )
    x = np.asarray(x, dtype=float)
    cols = np.vstack([cp.g_jac(x), cp.base.jac(x)]).T
    return snap_determinant(float(np.linalg.det(cols)), cols)


def analyze_constrained(
    cp: ConstrainedProblem,
    mesh: ManifoldMesh,
    threads: Optional[int] = None,
    eps_res: float = EPS_RES,
) -> ParetoComplex:
    """Run Algorithm-3-style first-order analysis over a manifold mesh."""
    if cp.m not in (2, 3):
        raise UnsupportedObjectiveCount("constrained pipeline supports m in (2, 3)")
    if cp.n_constraints + cp.m != cp.n or mesh.d != cp.d:
        raise NonSquareUnsupported(
            "need n - d + m = n (i.e. d = m) and a mesh of matching dimension"
        )
    mesh.validate(cp)
    N = len(mesh.points)
    proj = np.empty((N, cp.m, cp.n))
    omega = np.empty(N)
    for i in range(N):
        proj[i] = project_gradients(cp, mesh.points[i])
        omega[i] = augmented_minors(cp, mesh.points[i])

    def analyze_cell(ci: int) -> CellAnalysis:
        cell = mesh.cells[ci]
        analysis = CellAnalysis(cell_index=ci)
        verts: dict[str, SingularVertex] = {}
        skipped = 0
        for a_i in range(len(cell)):
            for b_i in range(a_i + 1, len(cell)):
                a, b = cell[a_i], cell[b_i]
                wa, wb = omega[a], omega[b]
                denom = wa - wb
                if denom == 0.0:
                    if wa == 0.0:
                        skipped += 1
                    continue
                mu = wa / denom  # weight of b
                if not -1e-10 < mu < 1.0 + 1e-10:
                    continue
                mu = min(max(mu, 0.0), 1.0)
                sub, weights = ((a,), np.array([1.0])) if mu <= 1e-9 else (
                    ((b,), np.array([1.0])) if mu >= 1.0 - 1e-9 else
                    ((a, b), np.array([1.0 - mu, mu]))
                )
                key = ("f",) + sub
                if repr(key) in verts:
                    continue
                pos = weights @ mesh.points[list(sub)]
                grads = np.tensordot(weights, proj[list(sub)], axes=1)
                verts[repr(key)] = SingularVertex(
                    key=key, x=pos, face=sub, mu=weights, grad_interp=grads
                )
        if skipped:
            analysis.warnings.append(
                f"{skipped} wholly-singular edge(s) skipped (degenerate minors)"
            )
            logger.debug("cell %d: degenerate augmented minors on %d edge(s)", ci, skipped)
        vlist = list(verts.values())
        analysis.singular_vertices = vlist
        if len(vlist) < cp.m:
            return analysis
        for v in vlist:
            try:
                v.lam, v.residual = solve_lambda(v.grad_interp)
                scale = max(float(np.linalg.norm(v.grad_interp, axis=1).max()), 1e-300)
                if v.residual > eps_res * scale:
                    v.critical_ok = False
            except RankCollapse:
                v.lam = None
                v.critical_ok = False
                analysis.warnings.append("rank collapse at a singular vertex")
        if cp.m == 2 and len(vlist) == 2:
            pieces = [Piece(vlist, "segment")]
        elif cp.m == 2:
            analysis.warnings.append(
                f"{len(vlist)} singular vertices in one cell (non-transversal crossing)"
            )
            X = np.array([v.x for v in vlist])
            _, _, vt = np.linalg.svd(X - X.mean(axis=0))
            order = np.argsort(X @ vt[0])
            chain = [vlist[i] for i in order]
            pieces = [Piece([p, q], "segment") for p, q in zip(chain, chain[1:])]
        else:
            X = np.array([v.x for v in vlist])
            center = X.mean(axis=0)
            _, _, vt = np.linalg.svd(X - center)
            ang = np.arctan2((X - center) @ vt[1], (X - center) @ vt[0])
            pieces = [Piece([vlist[i] for i in np.argsort(ang)], "polygon")]
        current = []
        for piece in pieces:
            if all(v.lam is not None and v.critical_ok for v in piece.verts):
                current.append(piece)
            else:
                analysis.strata[STRATUM_SINGULAR].append(piece)
        for j in range(cp.m):
            if not current:
                break
            values = {repr(v.key): float(v.lam[j]) for p in current for v in p.verts}
            current, dropped, boundary = clip_polytope(current, values, stage=("lam", j))
            analysis.strata[STRATUM_SINGULAR].extend(dropped)
            for w in boundary:
                analysis.markers.append((w, MARKER_BOUNDARY))
        analysis.strata[STRATUM_UNSTABLE].extend(current)
        return analysis

    idx = range(len(mesh.cells))
    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            analyses = list(pool.map(analyze_cell, idx))
    else:
        analyses = [analyze_cell(ci) for ci in idx]
    return glue(analyses, cp.base, mesh.as_tessellation(), order=1)


# ---------------------------------------------------------------------------
# built-in sphere meshes
# ---------------------------------------------------------------------------

_PHI = (1.0 + np.sqrt(5.0)) / 2.0
# mesh rotated by fixed angles so no icosahedron vertex sits on the equator
# x3 = 0 (4 raw vertices do), which would degenerate the minor systems there
_ROT_Y, _ROT_X = 0.25, 0.15


def _base_icosahedron():
    v = []
    for a, b in [(-1, _PHI), (1, _PHI), (-1, -_PHI), (1, -_PHI)]:
        v.append([a, b, 0.0])
    for a, b in [(-1, _PHI), (1, _PHI), (-1, -_PHI), (1, -_PHI)]:
        v.append([0.0, a, b])
    for a, b in [(-1, _PHI), (1, _PHI), (-1, -_PHI), (1, -_PHI)]:
        v.append([b, 0.0, a])
    verts = np.array(v)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    cy, sy = np.cos(_ROT_Y), np.sin(_ROT_Y)
    cx, sx = np.cos(_ROT_X), np.sin(_ROT_X)
    Ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    Rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    return verts @ (Rx @ Ry).T, faces


def icosphere(subdivisions: int = 0) -> ManifoldMesh:
    """Icosahedron-based triangulation of the unit sphere.

    Each subdivision splits every triangle in four, projecting edge midpoints
    radially back onto the sphere.  Construction order is deterministic.
    """
    verts, faces = _base_icosahedron()
    verts = [v for v in verts]
    for _ in range(int(subdivisions)):
        midpoint: dict[tuple, int] = {}

        def mid(a: int, b: int) -> int:
            key = (min(a, b), max(a, b))
            idx = midpoint.get(key)
            if idx is None:
                p = verts[a] + verts[b]
                p = p / np.linalg.norm(p)
                idx = len(verts)
                verts.append(p)
                midpoint[key] = idx
            return idx

        new_faces = []
        for (a, b, c) in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
        faces = new_faces
    return ManifoldMesh(points=np.array(verts), cells=faces, d=2)
