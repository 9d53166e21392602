"""Per-cell extraction of the singular/critical/stable polytopes and gluing.

For a map u: R^n -> R^m with m <= n, the rank of the Jacobian drops exactly
where r = n-m+1 column-window minors vanish simultaneously.  Inside every
tessellation cell the nodal minor values are interpolated linearly; each
(r+1)-vertex face carries at most one *singular vertex*, found by solving the
barycentric system

    sum_k mu_k omega_j(P_k) = 0   (j = 1..r),   sum_k mu_k = 1,

and accepted when all mu_k are (numerically) positive.  The singular vertices
of a cell assemble into an (m-1)-polytope; clipping it successively by the
interpolated multiplier fields lambda_j >= 0 yields the critical part, and
clipping that by the largest eigenvalue of the restricted second-derivative
form <= 0 yields the stable part.  Clip boundaries become marker points
(criticality boundaries and cusps).  Adjacent cells share singular vertices
through their defining faces, so gluing is an exact merge keyed on face ids.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    KernelDimensionMismatch,
    RankCollapse,
    UnsupportedObjectiveCount,
)
from .problems import VectorProblem
from .tessellation import Tessellation, enumerate_faces

logger = logging.getLogger(__name__)

EPS_ACCEPT = -1e-10   # barycentric positivity slack for accepting a vertex
MU_SNAP = 1e-9        # weights below this collapse the key to the sub-face
EPS_RANK = 1e-8       # relative singular-value cutoff for rank decisions
EPS_RES = 0.2         # relative lambda residual flagging a vertex non-critical
EPS_LIN = 1e-9        # linear-consistency tolerance (tests)

STRATUM_SINGULAR = "singular_only"
STRATUM_UNSTABLE = "critical_unstable"
STRATUM_STABLE = "critical_stable"
MARKER_BOUNDARY = "criticality_boundary"
MARKER_CUSP = "cusp"


# ---------------------------------------------------------------------------
# minor selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MinorSelection:
    """Which m-column subsets of the Jacobian form the r minors.

    The default is the r = n-m+1 contiguous windows [j, j+m).  A custom
    selection (still one m-tuple per minor, jointly covering every column) can
    be attached when the windows are structurally degenerate for a particular
    map.
    """

    columns: tuple

    @staticmethod
    def default(n: int, m: int) -> "MinorSelection":
        r = n - m + 1
        return MinorSelection(tuple(tuple(range(j, j + m)) for j in range(r)))

    @property
    def r(self) -> int:
        return len(self.columns)

    def validate(self, n: int, m: int) -> None:
        covered = set()
        for win in self.columns:
            if len(win) != m or any(not 0 <= c < n for c in win):
                raise ValueError(f"minor window {win} invalid for n={n}, m={m}")
            covered.update(win)
        if covered != set(range(n)):
            raise ValueError("minor windows must jointly cover every column")


def minor_values(problem: VectorProblem, sel: MinorSelection, x) -> np.ndarray:
    """Values of the selected m x m minors of the Jacobian at a point."""
    J = problem.jac(x)
    return minors_of_jacobian(J, sel)


def selection_for(problem: VectorProblem,
                  selection: Optional[MinorSelection] = None) -> MinorSelection:
    """Resolve the minor selection: explicit, problem-attached, or default."""
    if selection is not None:
        return selection
    if problem.minor_columns is not None:
        return MinorSelection(tuple(tuple(int(c) for c in w) for w in problem.minor_columns))
    return MinorSelection.default(problem.n, problem.m)


def minors_of_jacobian(J: np.ndarray, sel: MinorSelection) -> np.ndarray:
    return np.array([np.linalg.det(J[:, list(cols)]) for cols in sel.columns])


def snap_determinant(value: float, matrix: np.ndarray, rel: float = 1e-13) -> float:
    """Zero out a determinant below its round-off floor.

    |det| is bounded by the product of column norms (Hadamard); values far
    below that product times machine precision are pure noise and their
    arbitrary signs would otherwise fabricate crossings for structurally
    singular maps.
    """
    bound = float(np.prod(np.linalg.norm(matrix, axis=0)))
    return 0.0 if abs(value) <= rel * bound else value


# ---------------------------------------------------------------------------
# lambda solve
# ---------------------------------------------------------------------------


def _simplex_tangent_basis(m: int) -> np.ndarray:
    # orthonormal basis of {v : sum v_i = 0}, deterministic
    _, _, vt = np.linalg.svd(np.ones((1, m)))
    return vt[1:].T  # (m, m-1)


def solve_lambda(grad_interp: np.ndarray, eps_rank: float = EPS_RANK):
    """Weights of the vanishing convex-ish combination of gradient rows.

    Minimizes ||lambda^T G|| subject to sum(lambda) = 1 (minimal-norm
    tie-break), returning ``(lambda, residual)``.  Signs are *not*
    constrained; they drive the downstream clip.

    Raises
    ------
    RankCollapse
        rank(G) < m-1, so the weight direction is ambiguous.
    """
    G = np.asarray(grad_interp, dtype=float)
    m = G.shape[0]
    sv = np.linalg.svd(G, compute_uv=False)
    if sv[0] == 0.0 or (m >= 2 and sv[m - 2] <= eps_rank * sv[0]):
        raise RankCollapse(f"gradient rank below {m - 1}")
    lam0 = np.full(m, 1.0 / m)
    Z = _simplex_tangent_basis(m)
    A = G.T @ Z
    b = -G.T @ lam0
    # truncated-SVD solve with a cutoff tied to the gradient scale, so a
    # numerically-zero system falls back to the minimal-norm weights instead
    # of amplifying round-off
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    keep = s > eps_rank * sv[0]
    t = Vt[keep].T @ ((U[:, keep].T @ b) / s[keep]) if keep.any() else np.zeros(m - 1)
    lam = lam0 + Z @ t
    residual = float(np.linalg.norm(G.T @ lam))
    return lam, residual


# ---------------------------------------------------------------------------
# vertices and polytope pieces
# ---------------------------------------------------------------------------


@dataclass
class SingularVertex:
    """A vertex of the piecewise-linear singular set.

    Face-born vertices carry the defining face and barycentric weights;
    clip-born vertices carry neither but inherit interpolated data.  ``key``
    is the exact merge key across cells.
    """

    key: tuple
    x: np.ndarray
    face: Optional[tuple] = None
    mu: Optional[np.ndarray] = None
    grad_interp: Optional[np.ndarray] = None
    lam: Optional[np.ndarray] = None
    residual: float = 0.0
    hess_interp: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None
    critical_ok: bool = True
    kernel_fail: bool = False

    @property
    def hessian_eigs(self):
        return self.sigma


def _interp_vertex(a: SingularVertex, b: SingularVertex, t: float, stage) -> SingularVertex:
    """Linear interpolation between two vertices; canonical w.r.t. key order."""
    if repr(b.key) < repr(a.key):
        a, b = b, a
        t = 1.0 - t

    def lerp(u, v):
        if u is None or v is None:
            return None
        return u + t * (v - u)

    return SingularVertex(
        key=("c", stage, a.key, b.key),
        x=a.x + t * (b.x - a.x),
        grad_interp=lerp(a.grad_interp, b.grad_interp),
        lam=lerp(a.lam, b.lam),
        residual=a.residual + t * (b.residual - a.residual),
        hess_interp=lerp(a.hess_interp, b.hess_interp),
        sigma=lerp(a.sigma, b.sigma),
        critical_ok=a.critical_ok and b.critical_ok,
        kernel_fail=a.kernel_fail or b.kernel_fail,
    )


class Piece:
    """A connected convex fragment of a cell's (m-1)-polytope.

    ``verts`` is a pair for a segment (m = 2) or a cyclically ordered list
    for a planar polygon (m = 3).
    """

    __slots__ = ("verts", "kind")

    def __init__(self, verts: Sequence[SingularVertex], kind: str):
        self.verts = list(verts)
        self.kind = kind  # "segment" | "polygon"

    def distinct(self) -> bool:
        keys = {repr(v.key) for v in self.verts}
        return len(keys) == len(self.verts) and len(self.verts) >= (
            2 if self.kind == "segment" else 3
        )


def clip_polytope(pieces, values, stage="clip"):
    """Keep the part of each piece where the per-vertex scalar is >= 0.

    ``values`` maps vertex key repr -> scalar.  Returns
    ``(kept, dropped, boundary_vertices)``; scalar fields on inserted
    boundary vertices are linear interpolations of the endpoint data.
    """
    kept: list[Piece] = []
    dropped: list[Piece] = []
    boundary: list[SingularVertex] = []
    for piece in pieces:
        svals = [values[repr(v.key)] for v in piece.verts]
        scale = max((abs(s) for s in svals), default=0.0)
        snap = 1e-12 * scale
        svals = [0.0 if abs(s) <= snap else s for s in svals]
        if piece.kind == "segment":
            k, d, b = _split_segment(piece, svals, stage)
        else:
            k, d, b = _split_polygon(piece, svals, stage)
        kept.extend(k)
        dropped.extend(d)
        boundary.extend(b)
    return kept, dropped, boundary


def _split_segment(piece: Piece, s, stage):
    a, b = piece.verts
    sa, sb = s
    if sa >= 0.0 and sb >= 0.0:
        bd = []
        if sa == 0.0 and sb > 0.0:
            bd.append(a)
        if sb == 0.0 and sa > 0.0:
            bd.append(b)
        return [piece], [], bd
    if sa <= 0.0 and sb <= 0.0:
        bd = []
        if sa == 0.0 and sb < 0.0:
            bd.append(a)
        if sb == 0.0 and sa < 0.0:
            bd.append(b)
        return [], [piece], bd
    t = sa / (sa - sb)
    w = _interp_vertex(a, b, t, stage)
    if sa > 0.0:
        return [Piece([a, w], "segment")], [Piece([w, b], "segment")], [w]
    return [Piece([w, b], "segment")], [Piece([a, w], "segment")], [w]


def _split_polygon(piece: Piece, s, stage):
    verts = piece.verts
    k = len(verts)
    pos: list[SingularVertex] = []
    neg: list[SingularVertex] = []
    boundary: list[SingularVertex] = []
    for i in range(k):
        j = (i + 1) % k
        vi, vj = verts[i], verts[j]
        si, sj = s[i], s[j]
        if si >= 0.0:
            pos.append(vi)
        if si <= 0.0:
            neg.append(vi)
        if si == 0.0 and s[(i - 1) % k] * sj < 0.0:
            boundary.append(vi)  # level set passes exactly through a vertex
        if si * sj < 0.0:
            t = si / (si - sj)
            w = _interp_vertex(vi, vj, t, stage)
            pos.append(w)
            neg.append(w)
            boundary.append(w)
    out_pos = [Piece(pos, "polygon")] if _polygon_ok(pos) else []
    out_neg = [Piece(neg, "polygon")] if _polygon_ok(neg) else []
    return out_pos, out_neg, boundary


def _polygon_ok(verts) -> bool:
    return len({repr(v.key) for v in verts}) >= 3


# ---------------------------------------------------------------------------
# cell analysis
# ---------------------------------------------------------------------------


@dataclass
class CellAnalysis:
    cell_index: int
    singular_vertices: list = field(default_factory=list)
    strata: dict = field(default_factory=lambda: {
        STRATUM_SINGULAR: [],
        STRATUM_UNSTABLE: [],
        STRATUM_STABLE: [],
    })
    markers: list = field(default_factory=list)  # (SingularVertex, kind)
    warnings: list = field(default_factory=list)
    second_order_done: bool = False

    @property
    def sigma_polytope(self):
        return (
            self.strata[STRATUM_SINGULAR]
            + self.strata[STRATUM_UNSTABLE]
            + self.strata[STRATUM_STABLE]
        )

    @property
    def theta_polytope(self):
        return self.strata[STRATUM_UNSTABLE] + self.strata[STRATUM_STABLE]

    @property
    def stable_polytope(self):
        return self.strata[STRATUM_STABLE]


def _canonical_face_vertex(face, mu, snap=MU_SNAP):
    """Drop near-zero weights so a vertex sitting on a sub-face gets the
    sub-face key, letting adjacent cells merge it exactly once."""
    face = np.asarray(face)
    mu = np.asarray(mu, dtype=float)
    keep = mu > snap
    sub = tuple(int(i) for i in face[keep])
    mu_sub = mu[keep]
    mu_sub = mu_sub / mu_sub.sum()
    return sub, mu_sub


def singular_vertices_of_cell(
    omega_nodes: np.ndarray,
    cell: Sequence[int],
    points: np.ndarray,
    jac_nodes: np.ndarray,
    r: int,
    eps_accept: float = EPS_ACCEPT,
):
    """Solve the barycentric minor system on every (r)-dimensional face.

    ``omega_nodes``/``jac_nodes``/``points`` are indexed by global node id.
    Returns a dict key -> SingularVertex (keys canonicalized to sub-faces);
    rank-deficient face systems are skipped and counted.
    """
    out: dict[str, SingularVertex] = {}
    skipped = 0
    for face in enumerate_faces(cell, r):
        idx = list(face)
        A = np.vstack([omega_nodes[idx].T, np.ones(len(idx))])
        rhs = np.zeros(r + 1)
        rhs[-1] = 1.0
        try:
            mu = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            skipped += 1
            continue
        if not np.all(mu > eps_accept):
            continue
        sub, mu_sub = _canonical_face_vertex(face, np.maximum(mu, 0.0))
        if len(sub) == 0:
            skipped += 1
            continue
        key = ("f",) + sub
        if repr(key) in out:
            continue
        pos = mu_sub @ points[list(sub)]
        grads = np.tensordot(mu_sub, jac_nodes[list(sub)], axes=1)
        out[repr(key)] = SingularVertex(
            key=key,
            x=pos,
            face=sub,
            mu=mu_sub,
            grad_interp=grads,
        )
    return list(out.values()), skipped


def finite_difference_hessians(problem: VectorProblem, points_cell: np.ndarray,
                               jac_cell: np.ndarray) -> np.ndarray:
    """Per-objective Hessian estimate from nodal gradient differences.

    Solves V H_j = G_j where V stacks the edge vectors from vertex 0 and G_j
    stacks the gradient differences, then symmetrizes.  Exact for quadratics.
    """
    V = points_cell[1:] - points_cell[0]
    out = np.empty((problem.m, problem.n, problem.n))
    for j in range(problem.m):
        G = jac_cell[1:, j, :] - jac_cell[0, j, :]
        H = np.linalg.solve(V, G)
        out[j] = 0.5 * (H + H.T)
    return out


def generalized_hessian(vertex: SingularVertex, n: int, m: int,
                        eps_rank: float = EPS_RANK) -> np.ndarray:
    """Eigenvalues of the second-derivative form restricted to ker Du.

    The kernel basis comes from the SVD of the interpolated Jacobian; if the
    numerical rank drops below m-1 the kernel dimension is ambiguous and
    KernelDimensionMismatch is raised.
    """
    if vertex.lam is None or vertex.hess_interp is None:
        raise KernelDimensionMismatch("vertex lacks weights or Hessian data")
    G = vertex.grad_interp
    _, sv, vt = np.linalg.svd(G)
    if sv[0] == 0.0 or (m >= 2 and sv[m - 2] <= eps_rank * sv[0]):
        raise KernelDimensionMismatch("interpolated Jacobian rank below m-1")
    W = vt[m - 1:].T  # (n, n-m+1) orthonormal kernel-ish basis
    H = np.tensordot(vertex.lam, vertex.hess_interp, axes=1)
    B = W.T @ H @ W
    B = 0.5 * (B + B.T)
    return np.linalg.eigvalsh(B)


# ---------------------------------------------------------------------------
# analyzer
# ---------------------------------------------------------------------------


class Analyzer:
    """Runs the per-cell pipeline over a tessellation and glues the result.

    Nodal Jacobians and minors are cached once up front; Hessians are filled
    lazily per node (idempotent dict writes, so concurrent workers at worst
    recompute a value).  Cell analyses are pure functions of those caches, so
    they can run in any order or in parallel and the glue, keyed on face
    identities, is order-independent.
    """

    def __init__(
        self,
        problem: VectorProblem,
        tess: Tessellation,
        selection: Optional[MinorSelection] = None,
        order: int = 2,
        hessian_mode: str = "analytic",
        eps_res: float = EPS_RES,
    ):
        if problem.m not in (2, 3):
            raise UnsupportedObjectiveCount(
                f"polytope realization supports m in (2, 3), got m={problem.m}"
            )
        if problem.sigma_skip and problem.n > 2:
            raise UnsupportedObjectiveCount(
                "m > n mode implemented for n <= 2 only"
            )
        self.problem = problem
        self.tess = tess
        self.order = order
        self.hessian_mode = hessian_mode
        self.eps_res = eps_res
        self.sigma_skip = problem.sigma_skip
        if not self.sigma_skip:
            self.selection = selection_for(problem, selection)
            self.selection.validate(problem.n, problem.m)
        else:
            self.selection = None
            if order >= 2:
                logger.info("m > n: second-order clip skipped (kernel is trivial)")
        pts = tess.nodes.points
        N = len(pts)
        self.jac_nodes = np.empty((N, problem.m, problem.n))
        for i in range(N):
            self.jac_nodes[i] = problem.jac(pts[i])
        if not self.sigma_skip:
            r = self.selection.r
            self.omega_nodes = np.empty((N, r))
            for i in range(N):
                J = self.jac_nodes[i]
                for j, cols in enumerate(self.selection.columns):
                    sub = J[:, list(cols)]
                    self.omega_nodes[i, j] = snap_determinant(
                        float(np.linalg.det(sub)), sub
                    )
            for j in range(r):
                if N and np.all(self.omega_nodes[:, j] == 0.0):
                    logger.warning(
                        "minor %s vanishes at every node: the selection is "
                        "structurally degenerate for this map, supply a custom "
                        "MinorSelection", self.selection.columns[j],
                    )
        else:
            self.omega_nodes = None
        self._hess_nodes: dict[int, np.ndarray] = {}
        self._lam_nodes: dict[int, tuple] = {}

    # -- caches --------------------------------------------------------------

    def _hess_node(self, i: int) -> np.ndarray:
        h = self._hess_nodes.get(i)
        if h is None:
            h = self.problem.hess(self.tess.nodes.points[i])
            self._hess_nodes[i] = h
        return h

    def candidate_cells(self) -> np.ndarray:
        """Indices of cells where every minor changes sign (vectorized filter)."""
        cells = np.array(self.tess.cells)
        if self.sigma_skip:
            return np.arange(len(cells))
        om = self.omega_nodes[cells]  # (C, n+1, r)
        lo = om.min(axis=1)
        hi = om.max(axis=1)
        mask = np.all((lo <= 0.0) & (hi >= 0.0), axis=1)
        return np.nonzero(mask)[0]

    # -- per-cell pipeline -----------------------------------------------------

    def analyze_cell(self, ci: int) -> CellAnalysis:
        analysis = self.analyze_cell_first_order(ci)
        if self.order >= 2 and not self.sigma_skip:
            self.analyze_cell_second_order(analysis)
        return analysis

    def analyze_cell_first_order(self, ci: int) -> CellAnalysis:
        cell = self.tess.cells[ci]
        analysis = CellAnalysis(cell_index=ci)
        pts = self.tess.nodes.points
        if self.sigma_skip:
            verts = self._nodal_vertices(cell)
            pieces = self._full_cell_pieces(verts)
        else:
            verts, skipped = singular_vertices_of_cell(
                self.omega_nodes, cell, pts, self.jac_nodes, self.selection.r
            )
            if skipped:
                analysis.warnings.append(f"{skipped} rank-deficient face system(s) skipped")
            if len(verts) < self.problem.m:
                return analysis
            for v in verts:
                try:
                    v.lam, v.residual = solve_lambda(v.grad_interp)
                    scale = max(float(np.linalg.norm(v.grad_interp, axis=1).max()), 1e-300)
                    if v.residual > self.eps_res * scale:
                        v.critical_ok = False
                except RankCollapse:
                    v.lam = None
                    v.critical_ok = False
                    analysis.warnings.append("rank collapse at a singular vertex")
            if self.order >= 2:
                self._attach_hessians(verts, ci)
            pieces = self._assemble_pieces(verts, analysis)
        analysis.singular_vertices = verts
        if not pieces:
            return analysis
        # validity stage: pieces touching a vertex without usable weights stay
        # singular-only as a whole (measure-zero configurations, logged)
        valid: list[Piece] = []
        for piece in pieces:
            if all(v.lam is not None and v.critical_ok for v in piece.verts):
                valid.append(piece)
            else:
                analysis.strata[STRATUM_SINGULAR].append(piece)
                logger.debug("cell %d: piece dropped at validity stage", ci)
        current = valid
        for j in range(self.problem.m):
            if not current:
                break
            values = {repr(v.key): float(v.lam[j]) for p in current for v in p.verts}
            current, dropped, boundary = clip_polytope(current, values, stage=("lam", j))
            analysis.strata[STRATUM_SINGULAR].extend(dropped)
            for w in boundary:
                analysis.markers.append((w, MARKER_BOUNDARY))
        # first-order output: critical pieces are labelled unstable until the
        # second-order clip upgrades the surviving part
        analysis.strata[STRATUM_UNSTABLE].extend(current)
        return analysis

    def analyze_cell_second_order(self, analysis: CellAnalysis) -> CellAnalysis:
        if self.sigma_skip:
            return analysis
        theta = analysis.strata[STRATUM_UNSTABLE]
        analysis.strata[STRATUM_UNSTABLE] = []
        analysis.second_order_done = True
        if not theta:
            return analysis
        seen: dict[str, float] = {}
        sigma_scale = 1.0
        for piece in theta:
            for v in piece.verts:
                k = repr(v.key)
                if k in seen:
                    continue
                if v.sigma is None:
                    try:
                        v.sigma = generalized_hessian(v, self.problem.n, self.problem.m)
                    except KernelDimensionMismatch:
                        v.kernel_fail = True
                        logger.debug("kernel dimension mismatch; vertex treated as unstable")
                if v.sigma is not None:
                    sigma_scale = max(sigma_scale, float(np.abs(v.sigma).max()))
                seen[k] = 0.0
        values = {}
        for piece in theta:
            for v in piece.verts:
                if v.kernel_fail or v.sigma is None:
                    values[repr(v.key)] = -10.0 * sigma_scale
                else:
                    values[repr(v.key)] = -float(v.sigma.max())
        stable, unstable, boundary = clip_polytope(theta, values, stage=("sig", 0))
        analysis.strata[STRATUM_STABLE].extend(stable)
        analysis.strata[STRATUM_UNSTABLE].extend(unstable)
        for w in boundary:
            analysis.markers.append((w, MARKER_CUSP))
        return analysis

    # -- helpers ---------------------------------------------------------------

    def _attach_hessians(self, verts, ci):
        if self.hessian_mode == "fd":
            cell = self.tess.cells[ci]
            pts_cell = self.tess.nodes.points[list(cell)]
            jac_cell = self.jac_nodes[list(cell)]
            H = finite_difference_hessians(self.problem, pts_cell, jac_cell)
            for v in verts:
                v.hess_interp = H
        else:
            for v in verts:
                hs = np.array([self._hess_node(int(i)) for i in v.face])
                v.hess_interp = np.tensordot(v.mu, hs, axes=1)

    def _assemble_pieces(self, verts, analysis) -> list:
        m = self.problem.m
        if m == 2:
            if len(verts) == 2:
                return [Piece(verts, "segment")]
            analysis.warnings.append(
                f"{len(verts)} singular vertices in one cell (non-transversal crossing)"
            )
            logger.warning(
                "cell %d: %d singular vertices; building a path through them",
                analysis.cell_index, len(verts),
            )
            X = np.array([v.x for v in verts])
            center = X.mean(axis=0)
            _, _, vt = np.linalg.svd(X - center)
            order = np.argsort(X @ vt[0])
            chain = [verts[i] for i in order]
            return [Piece([a, b], "segment") for a, b in zip(chain, chain[1:])]
        # m == 3: planar polygon ordered by angle in the best-fit plane
        X = np.array([v.x for v in verts])
        center = X.mean(axis=0)
        _, _, vt = np.linalg.svd(X - center)
        uu = (X - center) @ vt[0]
        vv = (X - center) @ vt[1]
        order = np.argsort(np.arctan2(vv, uu))
        return [Piece([verts[i] for i in order], "polygon")]

    def _nodal_vertices(self, cell):
        verts = []
        for i in cell:
            entry = self._lam_nodes.get(i)
            if entry is None:
                try:
                    lam, res = solve_lambda(self.jac_nodes[i])
                    ok = res <= self.eps_res * max(
                        float(np.linalg.norm(self.jac_nodes[i], axis=1).max()), 1e-300
                    )
                except RankCollapse:
                    lam, res, ok = None, np.inf, False
                entry = (lam, res, ok)
                self._lam_nodes[i] = entry
            lam, res, ok = entry
            verts.append(
                SingularVertex(
                    key=("f", int(i)),
                    x=self.tess.nodes.points[i].copy(),
                    face=(int(i),),
                    mu=np.array([1.0]),
                    grad_interp=self.jac_nodes[i].copy(),
                    lam=None if lam is None else lam.copy(),
                    residual=res,
                    critical_ok=ok,
                )
            )
        return verts

    def _full_cell_pieces(self, verts):
        if self.problem.n == 1:
            return [Piece(verts, "segment")]
        return [Piece(verts, "polygon")]

    # -- full run ----------------------------------------------------------------

    def run(self, threads: Optional[int] = None) -> "ParetoComplex":
        analyses = self.run_cells(threads=threads)
        return glue(analyses, self.problem, self.tess, order=self.order)

    def run_cells(self, threads: Optional[int] = None) -> list:
        idx = self.candidate_cells()
        if threads and threads > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=threads) as pool:
                analyses = list(pool.map(self.analyze_cell, idx))
        else:
            analyses = [self.analyze_cell(ci) for ci in idx]
        return analyses


# ---------------------------------------------------------------------------
# gluing
# ---------------------------------------------------------------------------


class ParetoComplex:
    """Glued global output: labelled (m-1)-complex with marker points."""

    def __init__(self, n, m, positions, u_values, lam, sigma, keys,
                 simplices, markers, problem_name=""):
        self.n = n
        self.m = m
        self.positions = positions      # (V, n)
        self.u_values = u_values        # (V, m)
        self.lam = lam                  # (V, m), NaN where unknown
        self.sigma = sigma              # (V, k) or None, NaN where unknown
        self.keys = keys                # list of canonical vertex keys
        self.simplices = simplices      # list of (ids, stratum, source_cell)
        self.markers = markers          # list of (vertex_id, kind)
        self.problem_name = problem_name

    # -- queries -----------------------------------------------------------

    @property
    def num_vertices(self) -> int:
        return len(self.positions)

    def is_empty(self) -> bool:
        return len(self.simplices) == 0

    def simplex_ids(self, strata: Optional[Iterable[str]] = None):
        if strata is None:
            return list(range(len(self.simplices)))
        strata = set(strata)
        return [i for i, (_, s, _) in enumerate(self.simplices) if s in strata]

    def strata_counts(self) -> dict:
        out: dict[str, int] = {}
        for _, s, _ in self.simplices:
            out[s] = out.get(s, 0) + 1
        return out

    def components(self, strata: Optional[Iterable[str]] = None) -> list:
        """Connected components (vertex-id sets) of the chosen subcomplex."""
        parent: dict[int, int] = {}

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        def union(a, b):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)

        for i in self.simplex_ids(strata):
            ids = self.simplices[i][0]
            for v in ids:
                parent.setdefault(v, v)
            for a, b in zip(ids, ids[1:]):
                union(a, b)
        groups: dict[int, set] = {}
        for v in parent:
            groups.setdefault(find(v), set()).add(v)
        return sorted(groups.values(), key=lambda s: min(s))

    def markers_of_kind(self, kind: str) -> list:
        return [vid for vid, k in self.markers if k == kind]

    def sample_points(self, strata=None, density: int = 8) -> np.ndarray:
        """Barycentric sample points over the chosen simplices (tests, stats)."""
        out = []
        for i in self.simplex_ids(strata):
            ids = self.simplices[i][0]
            P = self.positions[list(ids)]
            if len(ids) == 1:
                out.append(P)
            elif len(ids) == 2:
                t = np.linspace(0.0, 1.0, density)[:, None]
                out.append(P[0] * (1 - t) + P[1] * t)
            else:
                for a in range(density + 1):
                    for b in range(density + 1 - a):
                        c = density - a - b
                        w = np.array([a, b, c]) / density
                        out.append((w @ P)[None, :])
        if not out:
            return np.empty((0, self.n))
        return np.vstack(out)


def glue(analyses: Iterable[CellAnalysis], problem: VectorProblem,
         tess: Tessellation, order: int = 2) -> ParetoComplex:
    """Merge per-cell polytopes into one complex, keyed on face identities.

    Vertices shared by adjacent cells carry identical keys and identical
    floating-point data (they are computed from the same face inputs), so the
    merge is exact and independent of the cell processing order.
    """
    vertex_table: dict[str, SingularVertex] = {}
    simplex_table: dict[tuple, tuple] = {}
    marker_table: dict[tuple, tuple] = {}

    def register(v: SingularVertex) -> str:
        k = repr(v.key)
        if k not in vertex_table:
            vertex_table[k] = v
        return k

    for analysis in sorted(analyses, key=lambda a: a.cell_index):
        for stratum, pieces in analysis.strata.items():
            for piece in pieces:
                if not piece.distinct():
                    continue
                kl = [register(v) for v in piece.verts]
                if piece.kind == "segment":
                    simplex_keys = [tuple(sorted(kl))]
                else:
                    root_pos = min(range(len(kl)), key=lambda i: kl[i])
                    cyc = kl[root_pos:] + kl[:root_pos]
                    simplex_keys = [
                        tuple(sorted((cyc[0], cyc[i], cyc[i + 1])))
                        for i in range(1, len(cyc) - 1)
                    ]
                for sk in simplex_keys:
                    if len(set(sk)) != len(sk):
                        continue
                    if sk not in simplex_table:
                        simplex_table[sk] = (stratum, analysis.cell_index)
        for v, kind in analysis.markers:
            marker_table[(repr(v.key), kind)] = (register(v), kind)

    ordered_keys = sorted(vertex_table)
    index_of = {k: i for i, k in enumerate(ordered_keys)}
    V = len(ordered_keys)
    n, m = problem.n, problem.m
    positions = np.empty((V, n))
    u_values = np.empty((V, m))
    lam = np.full((V, m), np.nan)
    ksig = max(n - m + 1, 0)
    sigma = np.full((V, ksig), np.nan) if (order >= 2 and ksig > 0) else None
    for k, i in index_of.items():
        v = vertex_table[k]
        positions[i] = v.x
        u_values[i] = problem.u(v.x)
        if v.lam is not None:
            lam[i] = v.lam
        if sigma is not None and v.sigma is not None:
            sigma[i] = v.sigma
    simplices = sorted(
        (tuple(sorted(index_of[k] for k in sk)), stratum, ci)
        for sk, (stratum, ci) in simplex_table.items()
    )
    markers = sorted((index_of[k], kind) for (k, kind) in marker_table.values())
    return ParetoComplex(
        n=n,
        m=m,
        positions=positions,
        u_values=u_values,
        lam=lam,
        sigma=sigma,
        keys=[vertex_table[k].key for k in ordered_keys],
        simplices=simplices,
        markers=markers,
        problem_name=problem.name,
    )


def analyze(problem: VectorProblem, tess: Tessellation, order: int = 2,
            selection: Optional[MinorSelection] = None, threads: Optional[int] = None,
            hessian_mode: str = "analytic") -> ParetoComplex:
    """One-call pipeline: cache, per-cell analysis, glue."""
    return Analyzer(
        problem, tess, selection=selection, order=order, hessian_mode=hessian_mode
    ).run(threads=threads)
