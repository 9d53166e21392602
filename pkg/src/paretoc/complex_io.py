"""JSON schemas: complex files (version 1) and debug mesh files.

Complex files persist a ParetoComplex together with per-vertex data so
image-space fronts can be plotted without re-evaluating the objectives.
Floats are serialized with shortest round-trip representation, so
``parse(serialize(c))`` reproduces every number exactly and reruns are
byte-identical.
"""

from __future__ import annotations

import json
from typing import Optional

import numpy as np

from .continuation import ParetoComplex
from .tessellation import Tessellation

COMPLEX_VERSION = 1
MESH_VERSION = 1

STRATA = ("singular_only", "critical_unstable", "critical_stable")
MARKER_KINDS = ("criticality_boundary", "cusp")


def complex_to_dict(cx: ParetoComplex, provenance: Optional[dict] = None) -> dict:
    vertices = []
    for i in range(cx.num_vertices):
        lam = cx.lam[i]
        sig = cx.sigma[i] if cx.sigma is not None else None
        vertices.append(
            {
                "id": i,
                "x": [float(v) for v in cx.positions[i]],
                "u": [float(v) for v in cx.u_values[i]],
                "lambda": None if np.any(np.isnan(lam)) else [float(v) for v in lam],
                "sigma": None
                if sig is None or np.any(np.isnan(sig))
                else [float(v) for v in sig],
            }
        )
    return {
        "version": COMPLEX_VERSION,
        "ambient_dim": cx.n,
        "objectives": cx.m,
        "vertices": vertices,
        "simplices": [
            {"vertex_ids": list(ids), "stratum": stratum}
            for ids, stratum, _src in cx.simplices
        ],
        "markers": [
            {
                "x": [float(v) for v in cx.positions[vid]],
                "kind": kind,
                "vertex": vid,
            }
            for vid, kind in cx.markers
        ],
        "provenance": provenance
        or {"problem": cx.problem_name, "grid": None, "iterations": None},
    }


def complex_from_dict(doc: dict) -> ParetoComplex:
    if doc.get("version") != COMPLEX_VERSION:
        raise ValueError(f"unsupported complex file version {doc.get('version')!r}")
    n = int(doc["ambient_dim"])
    m = int(doc["objectives"])
    verts = doc["vertices"]
    V = len(verts)
    positions = np.empty((V, n))
    u_values = np.empty((V, m))
    lam = np.full((V, m), np.nan)
    sig_len = 0
    for v in verts:
        if v.get("sigma"):
            sig_len = max(sig_len, len(v["sigma"]))
    sigma = np.full((V, sig_len), np.nan) if sig_len else None
    for v in verts:
        i = int(v["id"])
        positions[i] = v["x"]
        u_values[i] = v["u"]
        if v.get("lambda") is not None:
            lam[i] = v["lambda"]
        if sigma is not None and v.get("sigma") is not None:
            sigma[i] = v["sigma"]
    simplices = []
    for s in doc["simplices"]:
        stratum = s["stratum"]
        if stratum not in STRATA:
            raise ValueError(f"unknown stratum {stratum!r}")
        simplices.append((tuple(int(i) for i in s["vertex_ids"]), stratum, -1))
    markers = []
    for mk in doc["markers"]:
        if mk["kind"] not in MARKER_KINDS:
            raise ValueError(f"unknown marker kind {mk['kind']!r}")
        markers.append((int(mk.get("vertex", -1)), mk["kind"]))
    prov = doc.get("provenance") or {}
    return ParetoComplex(
        n=n,
        m=m,
        positions=positions,
        u_values=u_values,
        lam=lam,
        sigma=sigma,
        keys=[("file", i) for i in range(V)],
        simplices=sorted(simplices),
        markers=sorted(markers),
        problem_name=prov.get("problem") or "",
    )


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1)


def save_complex(path, cx: ParetoComplex, provenance: Optional[dict] = None) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(complex_to_dict(cx, provenance)))
        fh.write("\n")


def load_complex(path) -> ParetoComplex:
    with open(path) as fh:
        return complex_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# mesh schema (debugging / manifold input)
# ---------------------------------------------------------------------------


def mesh_to_dict(points: np.ndarray, cells, manifold_dim: Optional[int] = None) -> dict:
    points = np.asarray(points, dtype=float)
    doc = {
        "version": MESH_VERSION,
        "dim": manifold_dim if manifold_dim is not None else points.shape[1],
        "embedding_dim": points.shape[1],
        "points": [[float(v) for v in p] for p in points],
        "cells": [list(int(i) for i in c) for c in cells],
    }
    return doc


def tessellation_to_dict(tess: Tessellation) -> dict:
    return mesh_to_dict(tess.nodes.points, tess.cells)


def save_mesh(path, points, cells, manifold_dim: Optional[int] = None) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(mesh_to_dict(points, cells, manifold_dim)))
        fh.write("\n")


def load_mesh(path):
    """Returns (points, cells, manifold_dim, embedding_dim)."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != MESH_VERSION:
        raise ValueError(f"unsupported mesh file version {doc.get('version')!r}")
    points = np.array(doc["points"], dtype=float)
    cells = [tuple(int(i) for i in c) for c in doc["cells"]]
    return points, cells, int(doc["dim"]), int(doc.get("embedding_dim", doc["dim"]))
