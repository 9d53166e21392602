"""Iterative refinement: resample the current approximation, insert, rerun.

Each iteration generates candidate points on the approximated optimal set
(midpoints along polylines for two objectives, or an accumulated-volume
maximin fill for higher strata), filters them through a spacing guard,
inserts the survivors into the tessellation and re-analyzes.  Stopping is
driven by the magnitude of the Jacobian minors at the complex vertices,
recomputed from true Jacobians at the vertex positions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .continuation import (
    Analyzer,
    MinorSelection,
    ParetoComplex,
    STRATUM_STABLE,
    STRATUM_UNSTABLE,
    minors_of_jacobian,
    selection_for,
)
from .errors import EmptyComplex, NoProgress
from .geometry import simplex_measure
from .metrics import hausdorff
from .problems import VectorProblem
from .tessellation import Tessellation, insert_nodes

logger = logging.getLogger(__name__)

SPACING_GAMMA = 0.1  # candidate-to-node distance floor, x local shortest edge


@dataclass
class IterationStats:
    iteration: int
    nodes: int
    max_minor: float
    mean_minor: float
    hausdorff_to_ref: Optional[float] = None


@dataclass
class RefinementState:
    problem: VectorProblem
    tess: Tessellation
    complex: ParetoComplex
    order: int = 2
    selection: Optional[MinorSelection] = None
    iteration: int = 0
    history: list = field(default_factory=list)


def initial_state(
    problem: VectorProblem,
    tess: Tessellation,
    order: int = 2,
    selection: Optional[MinorSelection] = None,
    threads: Optional[int] = None,
) -> RefinementState:
    cx = Analyzer(problem, tess, selection=selection, order=order).run(threads=threads)
    return RefinementState(
        problem=problem, tess=tess, complex=cx, order=order, selection=selection
    )


# ---------------------------------------------------------------------------
# candidate generation
# ---------------------------------------------------------------------------


def _target_strata(cx: ParetoComplex):
    """Stable stratum when present, whole critical set otherwise."""
    if cx.simplex_ids([STRATUM_STABLE]):
        return [STRATUM_STABLE]
    if cx.simplex_ids([STRATUM_UNSTABLE, STRATUM_STABLE]):
        return [STRATUM_UNSTABLE, STRATUM_STABLE]
    raise EmptyComplex("no critical simplices to refine")


def _chains(cx: ParetoComplex, strata):
    """Decompose the selected segments into vertex chains (open or closed)."""
    segs = [cx.simplices[i][0] for i in cx.simplex_ids(strata)]
    if not segs or any(len(s) != 2 for s in segs):
        raise EmptyComplex("polyline resampling needs a nonempty segment complex")
    adj: dict[int, list] = {}
    for si, (a, b) in enumerate(segs):
        adj.setdefault(a, []).append((si, b))
        adj.setdefault(b, []).append((si, a))
    used = [False] * len(segs)
    chains = []

    def walk(start: int):
        chain = [start]
        cur = start
        while True:
            nxt = [(si, o) for si, o in adj[cur] if not used[si]]
            if not nxt:
                break
            nxt.sort(key=lambda t: (t[1], t[0]))
            si, other = nxt[0]
            used[si] = True
            chain.append(other)
            cur = other
        return chain

    # open chains first, from their lowest-id endpoint
    endpoints = sorted(v for v, lst in adj.items() if len(lst) % 2 == 1)
    for v in endpoints:
        while any(not used[si] for si, _ in adj[v]):
            chains.append(walk(v))
    # remaining loops, from their lowest-id vertex
    for v in sorted(adj):
        while any(not used[si] for si, _ in adj[v]):
            chains.append(walk(v))
    return chains


def resample_polyline(cx: ParetoComplex) -> list:
    """Arclength midpoints along every critical polyline.

    For a chain of k segments and length L the candidates sit at arclengths
    (2i-1) L / (2k), i = 1..k: as many points as segments, never coinciding
    with existing polyline vertices.
    """
    if cx.m != 2:
        raise EmptyComplex("polyline resampling applies to two-objective output")
    strata = _target_strata(cx)
    out = []
    for chain in _chains(cx, strata):
        P = cx.positions[chain]
        seg_len = np.linalg.norm(np.diff(P, axis=0), axis=1)
        L = float(seg_len.sum())
        k = len(seg_len)
        if L <= 0.0 or k == 0:
            continue
        targets = (2 * np.arange(1, k + 1) - 1) * L / (2 * k)
        cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        for s in targets:
            j = int(np.searchsorted(cum, s, side="right") - 1)
            j = min(j, k - 1)
            t = (s - cum[j]) / seg_len[j] if seg_len[j] > 0 else 0.5
            out.append(P[j] + t * (P[j + 1] - P[j]))
    if not out:
        raise EmptyComplex("no resampling candidates produced")
    return out


def maximin_fill(cx: ParetoComplex, count: int) -> list:
    """Greedy accumulated-volume filling of the critical subcomplex.

    Repeatedly picks the simplex whose own measure plus that of its active
    neighbours is largest (ties to the lowest simplex index), emits its
    centroid and excludes it; excluded simplices contribute nothing and
    cannot be picked again, so at most one point per simplex is produced.
    """
    return _maximin_fill_with_hosts(cx, count)[0]


def _maximin_fill_with_hosts(cx: ParetoComplex, count: int):
    strata = _target_strata(cx)
    ids = cx.simplex_ids(strata)
    if not ids:
        raise EmptyComplex("no simplices to fill")
    vols = []
    verts = []
    for i in ids:
        v = cx.simplices[i][0]
        verts.append(v)
        vols.append(simplex_measure(cx.positions[list(v)]))
    vols = np.array(vols)
    k = len(ids)
    # adjacency: share a facet of the simplex (vertex for segments, edge for triangles)
    facet_map: dict[tuple, list] = {}
    for si, v in enumerate(verts):
        if len(v) == 2:
            facets = [(v[0],), (v[1],)]
        else:
            facets = [tuple(sorted((v[a], v[b]))) for a, b in ((0, 1), (1, 2), (0, 2))]
        for f in facets:
            facet_map.setdefault(f, []).append(si)
    neighbors = [set() for _ in range(k)]
    for members in facet_map.values():
        for a in members:
            for b in members:
                if a != b:
                    neighbors[a].add(b)
    active = np.ones(k, dtype=bool)
    out = []
    hosts = []
    for _ in range(min(count, k)):
        acc = np.where(active, vols, 0.0).copy()
        for si in range(k):
            if not active[si]:
                acc[si] = -np.inf
                continue
            acc[si] += sum(vols[j] for j in neighbors[si] if active[j])
        best = int(np.argmax(acc))  # argmax takes the lowest index on ties
        if not np.isfinite(acc[best]):
            break
        out.append(cx.positions[list(verts[best])].mean(axis=0))
        hosts.append(ids[best])
        active[best] = False
    return out, hosts


def _boundary_candidates(cx: ParetoComplex) -> list:
    """Open-chain endpoints and marker positions, re-evaluated every iteration.

    Midpoints alone never shrink the cells around the criticality boundaries,
    where the minors are steep; re-inserting the current boundary estimates
    drives those cells down too.
    """
    out = []
    try:
        strata = _target_strata(cx)
    except EmptyComplex:
        return out
    for chain in _chains(cx, strata):
        if chain[0] != chain[-1]:
            out.append(cx.positions[chain[0]].copy())
            out.append(cx.positions[chain[-1]].copy())
    for vid, _kind in cx.markers:
        out.append(cx.positions[vid].copy())
    return out


# ---------------------------------------------------------------------------
# iteration driver
# ---------------------------------------------------------------------------


def complex_minor_stats(
    problem: VectorProblem,
    cx: ParetoComplex,
    selection: Optional[MinorSelection] = None,
):
    """(max, mean) |minor| over refinement-target vertices, from true Jacobians."""
    if problem.sigma_skip:
        return 0.0, 0.0
    sel = selection_for(problem, selection)
    try:
        strata = _target_strata(cx)
    except EmptyComplex:
        return np.inf, np.inf
    vids = sorted({v for i in cx.simplex_ids(strata) for v in cx.simplices[i][0]})
    if not vids:
        return np.inf, np.inf
    vals = []
    for v in vids:
        J = problem.jac(cx.positions[v])
        vals.append(np.abs(minors_of_jacobian(J, sel)).max())
    vals = np.array(vals)
    return float(vals.max()), float(vals.mean())


def iterate(
    state: RefinementState,
    scheme: str = "polyline",
    budget: Optional[int] = None,
    gamma: float = SPACING_GAMMA,
    reference: Optional[ParetoComplex] = None,
    threads: Optional[int] = None,
) -> RefinementState:
    """One refinement step: candidates, spacing guard, insertion, re-analysis."""
    problem = state.problem
    hosts = None
    if scheme == "polyline":
        candidates = resample_polyline(state.complex)
        candidates.extend(_boundary_candidates(state.complex))
    elif scheme == "maximin":
        cx = state.complex
        want = len(cx.simplex_ids(_target_strata(cx)))
        candidates, hosts = _maximin_fill_with_hosts(cx, want)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    if budget is not None and len(candidates) > budget:
        # rank the sites by minor magnitude and keep only the worst offenders
        sel = selection_for(problem, state.selection)
        if hosts is not None:
            cx = state.complex
            scores = []
            for host in hosts:
                vids = cx.simplices[host][0]
                scores.append(max(
                    float(np.abs(minors_of_jacobian(problem.jac(cx.positions[v]), sel)).max())
                    for v in vids
                ))
        else:
            scores = [
                float(np.abs(minors_of_jacobian(problem.jac(c), sel)).max())
                for c in candidates
            ]
        order = np.argsort(scores)[::-1][:budget]
        candidates = [candidates[i] for i in sorted(order)]
    # spacing guard: keep candidates at least gamma x (shortest edge incident
    # to their nearest node) away from every current node
    nodes = state.tess.nodes.points
    min_edge = state.tess.min_incident_edge()
    kept = []
    guard_pts = nodes
    guard_edges = min_edge
    for c in candidates:
        d = np.linalg.norm(guard_pts - c, axis=1)
        nearest = int(d.argmin())
        if d[nearest] < gamma * guard_edges[nearest]:
            continue
        kept.append(np.asarray(c, dtype=float))
        guard_pts = np.vstack([guard_pts, c[None, :]])
        guard_edges = np.append(guard_edges, d[nearest])
    if not kept:
        raise NoProgress(
            f"all {len(candidates)} candidates rejected by the spacing guard"
        )
    logger.info(
        "iteration %d: inserting %d/%d candidates",
        state.iteration + 1, len(kept), len(candidates),
    )
    tess = insert_nodes(state.tess, kept)
    cx = Analyzer(
        problem, tess, selection=state.selection, order=state.order
    ).run(threads=threads)
    mx, mean = complex_minor_stats(problem, cx, state.selection)
    href = None
    if reference is not None:
        strata = _target_strata(cx)
        href = hausdorff(cx, reference, strata=strata).hausdorff
    stats = IterationStats(
        iteration=state.iteration + 1,
        nodes=len(tess.nodes),
        max_minor=mx,
        mean_minor=mean,
        hausdorff_to_ref=href,
    )
    return RefinementState(
        problem=problem,
        tess=tess,
        complex=cx,
        order=state.order,
        selection=state.selection,
        iteration=state.iteration + 1,
        history=state.history + [stats],
    )


def should_stop(state: RefinementState, tau: float) -> bool:
    """True once the largest minor magnitude over target vertices drops below tau."""
    if not state.history:
        raise ValueError("should_stop needs at least one completed iteration")
    return state.history[-1].max_minor < tau
