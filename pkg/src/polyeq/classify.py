"""Equilibrium points of polygons and polyhedral surfaces.

A point ``q`` of a polyhedral surface is an equilibrium with respect to the
reference point ``o`` if the plane through ``q`` orthogonal to ``q - o``
supports the star of the cell containing ``q`` (with ``o`` on the inner
side).  Per cell type this becomes:

* vertex ``p``: ``<x - p, p - o> < 0`` for every edge-neighbour ``x``
  (unstable point);
* edge ``[a, b]``: the foot ``q`` of the perpendicular from ``o`` lies inside
  the edge and every vertex ``c`` of the two adjacent faces satisfies
  ``<c - q, q - o> < 0`` (saddle point);
* face: the foot of the perpendicular from ``o`` onto its plane lies inside
  the face (stable point).

All strict inequalities are tested on normalized slacks (cosines of the
relevant angles); a cell whose smallest slack is within ``tol`` of zero is
neither accepted nor rejected but reported as near-degenerate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .discretize import ClosedHullMesh, PolygonalCurve, PolyhedralPatch, merge_coplanar_faces
from .errors import ClassificationError, GeometryError
from .geometry import SADDLE, STABLE, UNSTABLE

DEFAULT_TOL = 1e-10

SUPPORTED = "supported"
NOT_SUPPORTED = "not_supported"
DEGENERATE = "degenerate"


@dataclass
class EquilibriumPoint:
    """One equilibrium of a polygon or polyhedron.

    ``carrier`` is ``("vertex", v)``, ``("edge", a, b)`` or ``("face", f)``
    with vertex/face ids of the classified mesh; ``family`` refines it
    (``h``/``v``/``d`` edges, ``T1``/``T2``/``Q`` faces on grid patches).
    ``grid_index`` is the anchor (componentwise minimum of the grid indices
    of the carrier's vertices) when the mesh comes from a grid.
    """

    kind: str
    location: NDArray
    carrier: tuple
    margin: float
    grid_index: Optional[tuple] = None
    family: str = ""
    cell_vertices: tuple = ()
    boundary: bool = False

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "carrier": [self.carrier[0]] + [int(x) for x in self.carrier[1:]],
            "family": self.family,
            "location": [float(x) for x in self.location],
            "margin": float(self.margin),
            "grid_index": None if self.grid_index is None else [float(x) for x in self.grid_index],
        }


@dataclass
class EquilibriumSet:
    """All equilibria found on one mesh.

    ``points`` holds every accepted equilibrium, including boundary cells of
    patches (``boundary=True``), which are excluded from :attr:`counts`.
    """

    points: list
    near_degenerate: list
    closed: bool
    origin: NDArray
    vertex_grid: Optional[NDArray] = None
    dim: int = 3

    def counted(self) -> list:
        return [p for p in self.points if not p.boundary]

    @property
    def counts(self) -> tuple[int, int, int]:
        """``(U, N, S)``: unstable, saddle, stable."""
        pts = self.counted()
        return (sum(p.kind == UNSTABLE for p in pts), sum(p.kind == SADDLE for p in pts),
                sum(p.kind == STABLE for p in pts))

    @property
    def U(self) -> int:
        return self.counts[0]

    @property
    def N(self) -> int:
        return self.counts[1]

    @property
    def S(self) -> int:
        return self.counts[2]

    def by_kind(self, kind: str) -> list:
        return [p for p in self.counted() if p.kind == kind]

    def to_dict(self) -> dict:
        U, N, S = self.counts
        return {"counts": {"U": U, "N": N, "S": S}, "closed": self.closed,
                "near_degenerate": [list(map(lambda x: x if isinstance(x, str) else int(x), c))
                                    for c in self.near_degenerate],
                "points": [p.to_dict() for p in self.counted()]}


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def _norm(a):
    return np.linalg.norm(a, axis=-1)


def _safe(x):
    return np.where(x > 0, x, 1.0)


def _verdict(slacks: NDArray, tol: float):
    """Per row: accepted (all > tol), near-degenerate (none < -tol but some
    within tol), margin (row minimum)."""
    m = slacks.min(axis=-1)
    return m > tol, (m >= -tol) & (m <= tol), m


def support_test(q, star_vertices, origin=(0.0, 0.0, 0.0), tol: float = DEFAULT_TOL) -> str:
    """Does the plane through ``q`` orthogonal to ``q - origin`` support the
    points ``star_vertices`` strictly (all on the origin side)?"""
    q = np.asarray(q, dtype=float)
    o = np.asarray(origin, dtype=float)
    x = np.asarray(star_vertices, dtype=float).reshape(-1, q.shape[-1])
    if len(x) == 0:
        raise ClassificationError("empty star")
    m = q - o
    if np.linalg.norm(m) == 0:
        raise ClassificationError("q coincides with the reference point")
    d = x - q
    slack = -_dot(d, m) / (_safe(_norm(d)) * np.linalg.norm(m))
    if np.any(slack < -tol):
        return NOT_SUPPORTED
    if np.any(slack <= tol):
        return DEGENERATE
    return SUPPORTED


# ---------------------------------------------------------------------------
# 2D
# ---------------------------------------------------------------------------


def classify_polygon(poly: PolygonalCurve, origin=(0.0, 0.0), tol: float = DEFAULT_TOL) -> EquilibriumSet:
    """Stable edges and unstable vertices of a polygonal curve.

    For open curves the two end vertices and nothing else are boundary cells.
    """
    o = np.asarray(origin, dtype=float)
    p = np.asarray(poly.vertices, dtype=float) - o
    k = len(p)
    if k < 3 and poly.closed:
        raise ClassificationError("closed polygon needs at least 3 vertices")
    idx = np.asarray(poly.indices, dtype=float)
    if poly.closed:
        nxt = np.roll(p, -1, axis=0)
        prv = np.roll(p, 1, axis=0)
        n_edges = k
        cross = p[:, 0] * nxt[:, 1] - p[:, 1] * nxt[:, 0]
        if not (np.all(cross > 0) or np.all(cross < 0)):
            raise ClassificationError("reference point is not strictly inside the closed polygon")
    else:
        nxt = p[1:]
        prv = None
        n_edges = k - 1

    points, near = [], []
    # edges -> stable points
    a, b = p[:n_edges], nxt[:n_edges]
    d = b - a
    ld = _norm(d)
    s = np.stack([-_dot(a, d) / (_norm(a) * ld), _dot(b, d) / (_norm(b) * ld)], axis=-1)
    ok, deg, margin = _verdict(s, tol)
    for e in np.flatnonzero(ok):
        t = -_dot(a[e], d[e]) / ld[e] ** 2
        loc = a[e] + t * d[e] + o
        points.append(EquilibriumPoint(STABLE, loc, ("edge", e, (e + 1) % k), float(margin[e]),
                                       (float(idx[e]),), "edge", (e, (e + 1) % k)))
    near += [("edge", int(e), int((e + 1) % k)) for e in np.flatnonzero(deg)]

    # vertices -> unstable points
    if poly.closed:
        vid = np.arange(k)
        left, right = prv, nxt
    else:
        vid = np.arange(1, k - 1)
        left, right = p[:-2], p[2:]
    pv = p[vid]
    sl = -_dot(left - pv, pv) / (_norm(left - pv) * _norm(pv))
    sr = -_dot(right - pv, pv) / (_norm(right - pv) * _norm(pv))
    ok, deg, margin = _verdict(np.stack([sl, sr], axis=-1), tol)
    for t in np.flatnonzero(ok):
        v = int(vid[t])
        points.append(EquilibriumPoint(UNSTABLE, pv[t] + o, ("vertex", v), float(margin[t]),
                                       (float(idx[v]),), "vertex", (v,)))
    near += [("vertex", int(vid[t])) for t in np.flatnonzero(deg)]
    points.sort(key=lambda q: (q.grid_index, q.kind))
    return EquilibriumSet(points, sorted(near), poly.closed, o, idx[:, None], dim=2)


# ---------------------------------------------------------------------------
# 3D
# ---------------------------------------------------------------------------


@dataclass
class _Complex:
    vertices: NDArray
    faces: list            # tuples of vertex ids
    face_family: list
    vertex_boundary: NDArray
    vertex_grid: Optional[NDArray]
    closed: bool


def _complex_from_patch(patch: PolyhedralPatch) -> _Complex:
    na, nb = patch.shape
    verts = patch.vertices.reshape(-1, 3)
    faces, fam = [], []
    for vs, _, tag in patch.faces():
        faces.append(vs)
        fam.append(tag)
    bnd = np.zeros((na, nb), dtype=bool)
    bnd[0, :] = bnd[-1, :] = bnd[:, 0] = bnd[:, -1] = True
    return _Complex(verts, faces, fam, bnd.ravel(), patch.grid_index_of_vertices(), False)


def _complex_from_hull(mesh: ClosedHullMesh) -> _Complex:
    return _Complex(np.asarray(mesh.vertices, float), list(mesh.facets), ["facet"] * len(mesh.facets),
                    np.zeros(len(mesh.vertices), dtype=bool), None, True)


def _complex_from_triangles(vertices, faces, closed=True) -> _Complex:
    v = np.asarray(vertices, dtype=float)
    facets, _ = merge_coplanar_faces(v, faces)
    return _Complex(v, list(facets), ["facet"] * len(facets), np.zeros(len(v), dtype=bool), None, closed)


def classify_patch(patch, origin=(0.0, 0.0, 0.0), tol: float = DEFAULT_TOL) -> EquilibriumSet:
    """Classify every vertex, edge and face of a grid patch or closed mesh.

    ``patch`` may be a :class:`PolyhedralPatch`, a :class:`ClosedHullMesh`,
    or a ``(vertices, faces)`` pair describing a closed triangulated surface
    (coplanar neighbouring triangles are merged into one polygonal face).
    Faces are re-oriented to face away from ``origin``; a face whose plane
    passes through ``origin`` raises :class:`ClassificationError`.
    """
    if isinstance(patch, PolyhedralPatch):
        cx = _complex_from_patch(patch)
    elif isinstance(patch, ClosedHullMesh):
        cx = _complex_from_hull(patch)
    elif isinstance(patch, tuple) and len(patch) == 2:
        cx = _complex_from_triangles(*patch)
    else:
        raise TypeError(f"cannot classify {type(patch).__name__}")
    return _classify_complex(cx, np.asarray(origin, dtype=float), tol)


def _classify_complex(cx: _Complex, o: NDArray, tol: float) -> EquilibriumSet:
    P = cx.vertices - o
    nv = len(P)
    faces = cx.faces
    nf = len(faces)
    if nf == 0:
        raise ClassificationError("mesh has no faces")

    # orientation from the first triangle of each face
    first = np.array([f[:3] for f in faces])
    nrm = np.cross(P[first[:, 1]] - P[first[:, 0]], P[first[:, 2]] - P[first[:, 0]])
    nn = _norm(nrm)
    if np.any(nn == 0):
        raise GeometryError("degenerate face")
    nrm = nrm / nn[:, None]
    side = _dot(nrm, P[first[:, 0]])
    scale = _norm(P[first[:, 0]])
    if np.any(np.abs(side) <= 1e-14 * scale):
        raise ClassificationError("a face plane passes through the reference point")
    faces = [tuple(f) if s > 0 else tuple(reversed(f)) for f, s in zip(faces, side)]
    nrm = nrm * np.sign(side)[:, None]

    # half-edges: (face, from, to, next-after-to)
    hf, ha, hb, hc = [], [], [], []
    for fi, f in enumerate(faces):
        k = len(f)
        for t in range(k):
            hf.append(fi)
            ha.append(f[t])
            hb.append(f[(t + 1) % k])
            hc.append(f[(t + 2) % k])
    hf, ha, hb, hc = map(np.asarray, (hf, ha, hb, hc))

    points, near = [], []
    grid = cx.vertex_grid

    def anchor(vids):
        if grid is None:
            return None
        g = grid[list(vids)]
        return tuple(float(x) for x in g.min(axis=0))

    # ---- faces -> stable
    A, B = P[ha], P[hb]
    fs = _dot(nrm[hf], np.cross(A, B)) / (_norm(A) * _norm(B))
    face_min = np.full(nf, np.inf)
    np.minimum.at(face_min, hf, fs)
    f_ok = face_min > tol
    f_deg = (face_min >= -tol) & (face_min <= tol)
    face_bnd = np.array([bool(cx.vertex_boundary[list(f)].any()) for f in faces])
    for fi in np.flatnonzero(f_ok):
        f = faces[fi]
        loc = nrm[fi] * _dot(nrm[fi], P[f[0]]) + o
        points.append(EquilibriumPoint(STABLE, loc, ("face", int(fi)), float(face_min[fi]), anchor(f),
                                       cx.face_family[fi], tuple(int(x) for x in f), bool(face_bnd[fi])))
    near += [("face", int(fi)) for fi in np.flatnonzero(f_deg & ~face_bnd)]

    # ---- edges -> saddles
    lo, hi = np.minimum(ha, hb), np.maximum(ha, hb)
    key = lo * nv + hi
    uniq, inv, cnt = np.unique(key, return_inverse=True, return_counts=True)
    if np.any(cnt > 2):
        raise GeometryError("non-manifold edge (more than two faces)")
    ne = len(uniq)
    ea, eb = uniq // nv, uniq % nv
    # opposite vertices: one per adjacent face (the vertex after the edge)
    opp = -np.ones((ne, 2), dtype=np.int64)
    slot = np.zeros(ne, dtype=np.int64)
    for h in range(len(hf)):
        e = inv[h]
        opp[e, slot[e]] = hc[h]
        slot[e] += 1
    e_bnd = cnt < 2
    Aa, Bb = P[ea], P[eb]
    D = Bb - Aa
    lD = _norm(D)
    s0 = -_dot(Aa, D) / (_norm(Aa) * lD)
    s1 = _dot(Bb, D) / (_norm(Bb) * lD)
    t = -_dot(Aa, D) / lD**2
    Q = Aa + t[:, None] * D
    lQ = _norm(Q)
    cols = [s0, s1]
    for k in range(2):
        c = opp[:, k]
        valid = c >= 0
        C = P[np.where(valid, c, 0)]
        dC = C - Q
        sc = -_dot(dC, Q) / (_safe(_norm(dC)) * lQ)
        cols.append(np.where(valid, sc, np.inf))
    es = np.stack(cols, axis=-1)
    e_ok, e_deg, e_margin = _verdict(es, tol)
    vb = cx.vertex_boundary
    for e in np.flatnonzero(e_ok):
        a, b = int(ea[e]), int(eb[e])
        fam = _edge_family(grid, a, b) if grid is not None else "edge"
        points.append(EquilibriumPoint(SADDLE, Q[e] + o, ("edge", a, b), float(e_margin[e]), anchor((a, b)),
                                       fam, (a, b), bool(e_bnd[e])))
    near += [("edge", int(ea[e]), int(eb[e])) for e in np.flatnonzero(e_deg & ~e_bnd)]

    # ---- vertices -> unstable
    vmin = np.full(nv, np.inf)
    sa = -_dot(Bb - Aa, Aa) / (lD * _norm(Aa))
    sb = -_dot(Aa - Bb, Bb) / (lD * _norm(Bb))
    np.minimum.at(vmin, ea, sa)
    np.minimum.at(vmin, eb, sb)
    present = np.isfinite(vmin)
    v_ok = present & (vmin > tol)
    v_deg = present & (vmin >= -tol) & (vmin <= tol)
    for v in np.flatnonzero(v_ok):
        points.append(EquilibriumPoint(UNSTABLE, P[v] + o, ("vertex", int(v)), float(vmin[v]), anchor((v,)),
                                       "vertex", (int(v),), bool(vb[v])))
    near += [("vertex", int(v)) for v in np.flatnonzero(v_deg & ~vb)]

    order = {UNSTABLE: 0, SADDLE: 1, STABLE: 2}
    points.sort(key=lambda q: (order[q.kind], q.carrier[1:]))
    near.sort(key=lambda c: (c[0], c[1:]))
    return EquilibriumSet(points, near, cx.closed, o, grid)


def _edge_family(grid, a, b) -> str:
    d = np.abs(grid[b] - grid[a])
    if d[1] < 0.5:
        return "h"
    if d[0] < 0.5:
        return "v"
    return "d"


def poincare_hopf(eqs: EquilibriumSet) -> int:
    """``S + U - N`` for a closed polyhedron (``S - U`` ... for polygons the
    analogous closed-curve value ``S - U`` is returned)."""
    if not eqs.closed:
        raise ClassificationError("Poincare-Hopf count needs a closed mesh, got a patch")
    U, N, S = eqs.counts
    if eqs.dim == 2:
        return S - U
    return S + U - N
