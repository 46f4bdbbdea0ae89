"""Equidistant discretization of curves and surfaces, the diagonal rule for
grid quads, and convex hulls of sample clouds.

Grid conventions
----------------
A curve is sampled at ``t = t1 + (k + offset) dt`` with ``dt = (t2 - t1)/n``;
a surface at ``u = u1 + (a + offset_u) du``, ``v = v1 + (b + offset_v) dv``
with ``du = (u2 - u1)/n`` and ``dv = (v2 - v1)/n_v`` (``n_v`` defaults to
``n``), so the mesh ratio is ``lam = dv/du``.  ``a, b`` are integer array
positions; the *grid index* of a vertex is its real-valued position relative
to a chosen parameter point ``center`` (normally a smooth equilibrium),
``i = (u - center_u)/du``, so indices of one grid are congruent mod 1.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import DiscretizationError, GeometryError, NonConvexError
from .geometry import ParametricCurve, ParametricSurface

log = logging.getLogger(__name__)

E_PLUS = "E+"
E_MINUS = "E-"
COPLANAR_TOL = 1e-10


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------


@dataclass
class PolygonalCurve:
    """Vertices of an equidistant curve discretization.

    ``indices[k]`` is the grid index of vertex ``k`` (real, consecutive
    entries differ by exactly one).  Closed curves list each vertex once.
    """

    vertices: NDArray
    indices: NDArray
    params: NDArray
    closed: bool
    offset: float
    n: int

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def perimeter(self) -> float:
        v = self.vertices
        seg = np.diff(np.vstack([v, v[:1]]) if self.closed else v, axis=0)
        return float(np.linalg.norm(seg, axis=1).sum())


def discretize_curve(curve: ParametricCurve, n: int, offset: float = 0.0,
                     center: Optional[float] = None) -> PolygonalCurve:
    """Equidistant polygon ``p_k = r(t1 + (k + offset) dt)``.

    Grid indices are measured from parameter ``center`` (default ``t1``).
    """
    if int(n) != n or n < 3:
        raise DiscretizationError(f"n too small: need n >= 3, got {n}")
    if not 0.0 <= offset < 1.0:
        raise DiscretizationError(f"offset must lie in [0, 1), got {offset}")
    t1, t2 = curve.domain
    dt = (t2 - t1) / n
    if curve.closed:
        k = np.arange(n)
    else:
        k = np.arange(n + 1)
        k = k[t1 + (k + offset) * dt <= t2 + 1e-12 * dt]
    t = t1 + (k + offset) * dt
    pts = curve(t)
    if not np.all(np.isfinite(pts)):
        raise GeometryError("non-finite curve samples")
    nxt = np.roll(pts, -1, axis=0) if curve.closed else pts[1:]
    seg = np.linalg.norm(nxt - pts[: len(nxt)], axis=1)
    if np.any(seg <= 1e-14 * max(1.0, float(np.abs(pts).max()))):
        raise DiscretizationError("coincident consecutive vertices")
    c = t1 if center is None else float(center)
    indices = (t - c) / dt
    return PolygonalCurve(pts, indices, t, curve.closed, float(offset), int(n))


# ---------------------------------------------------------------------------
# Diagonal rule
# ---------------------------------------------------------------------------


def _triple(a, b, c):
    return np.einsum("...i,...i->...", a, np.cross(b, c))


def diagonal_volume(p00, p10, p11, p01, origin=(0.0, 0.0, 0.0)):
    """``V = <a, b x c> + <c, d x a> - <a, b x d> - <b, c x d>`` in origin-
    translated coordinates, ``a, b, c, d = p00, p10, p11, p01``.

    Equals ``-det(b - a, c - a, d - a)``, i.e. minus six times the signed
    volume of the tetrahedron spanned by the quad; the second form is used
    because it is free of cancellation.  Broadcasts over leading axes.
    """
    o = np.asarray(origin, dtype=float)
    a, b, c, d = (np.asarray(p, dtype=float) - o for p in (p00, p10, p11, p01))
    return -_triple(b - a, c - a, d - a)


def _quad_orientation(a, b, c, d):
    """Signs of the four corner triple products of the rays to ``a, b, c, d``
    (origin-translated); all +1 for a counterclockwise convex ray fan seen
    from outside."""
    dets = np.stack([_triple(a, b, c), _triple(b, c, d), _triple(c, d, a), _triple(d, a, b)], axis=-1)
    return np.sign(dets)


def diagonal_signs(p00, p10, p11, p01, origin=(0.0, 0.0, 0.0), tol: float = COPLANAR_TOL):
    """Vectorized diagonal rule.

    Returns an int array: +1 for ``E+`` (edge ``p00-p11``), -1 for ``E-``
    (edge ``p10-p01``), 0 for coplanar quads (``|V|`` below ``tol`` times the
    natural volume scale).  Clockwise grids (parameter orientation opposite to
    the outward direction) are handled by flipping the sign of ``V``.
    Raises :class:`NonConvexError` if some quad's rays are not in convex
    position.
    """
    o = np.asarray(origin, dtype=float)
    a, b, c, d = (np.asarray(p, dtype=float) - o for p in (p00, p10, p11, p01))
    orient = _quad_orientation(a, b, c, d)
    s = orient[..., 0]
    bad = np.any(orient != s[..., None], axis=-1) | (s == 0)
    if np.any(bad):
        where = np.argwhere(np.atleast_1d(bad))[0].tolist()
        raise NonConvexError(f"rays through the quad corners are not in convex position (quad {where})")
    V = -_triple(b - a, c - a, d - a) * s
    scale = (np.linalg.norm(b - a, axis=-1) * np.linalg.norm(d - a, axis=-1)
             * np.linalg.norm(c - a, axis=-1))
    out = np.where(V > tol * scale, 1, np.where(V < -tol * scale, -1, 0))
    return out.astype(np.int8)


def choose_diagonal(quad: Sequence, origin=(0.0, 0.0, 0.0), tol: float = COPLANAR_TOL) -> str:
    """Diagonal of one grid quad ``(p_ij, p_i+1,j, p_i+1,j+1, p_i,j+1)``:
    ``"E+"`` for ``V > 0`` or coplanar, ``"E-"`` for ``V < 0``."""
    p00, p10, p11, p01 = (np.asarray(p, dtype=float) for p in quad)
    sign = int(diagonal_signs(p00, p10, p11, p01, origin, tol))
    return E_MINUS if sign < 0 else E_PLUS


# ---------------------------------------------------------------------------
# Surface patches
# ---------------------------------------------------------------------------


@dataclass
class PolyhedralPatch:
    """Triangulated grid patch.

    ``vertices[a, b]`` is the vertex at array position ``(a, b)``;
    ``grid_i[a]``, ``grid_j[b]`` are its real grid indices;
    ``diagonals[a, b]`` is +1 (``E+``), -1 (``E-``) or 0 (coplanar quad,
    kept as one planar quadrilateral face) for the quad with lower-left
    corner ``(a, b)``.
    """

    vertices: NDArray
    params_u: NDArray
    params_v: NDArray
    grid_i: NDArray
    grid_j: NDArray
    diagonals: NDArray
    offset: tuple
    lam: float
    n: int
    n_v: int
    domain: tuple
    origin: NDArray
    steps: tuple = (1.0, 1.0)

    @property
    def shape(self) -> tuple[int, int]:
        return self.vertices.shape[:2]

    def vertex_id(self, a, b):
        return np.asarray(a) * self.shape[1] + np.asarray(b)

    def faces(self) -> list[tuple]:
        """Faces as tuples of vertex ids, counterclockwise in parameter order,
        with tags ``T1``/``T2`` (the two triangles) or ``Q`` (coplanar quad)."""
        na, nb = self.shape
        out = []
        for a in range(na - 1):
            for b in range(nb - 1):
                i00, i10 = a * nb + b, (a + 1) * nb + b
                i11, i01 = i10 + 1, i00 + 1
                dg = self.diagonals[a, b]
                if dg > 0:
                    out.append(((i00, i10, i11), (a, b), "T1"))
                    out.append(((i11, i01, i00), (a, b), "T2"))
                elif dg < 0:
                    out.append(((i00, i10, i01), (a, b), "T1"))
                    out.append(((i10, i11, i01), (a, b), "T2"))
                else:
                    out.append(((i00, i10, i11, i01), (a, b), "Q"))
        return out

    def triangles(self) -> NDArray:
        """Triangle list (coplanar quads split along ``E+``)."""
        tris = []
        for verts, _, tag in self.faces():
            if tag == "Q":
                tris += [verts[:3], (verts[2], verts[3], verts[0])]
            else:
                tris.append(verts)
        return np.array(tris, dtype=np.int64)

    def grid_index_of_vertices(self) -> NDArray:
        gi, gj = np.meshgrid(self.grid_i, self.grid_j, indexing="ij")
        return np.stack([gi, gj], axis=-1).reshape(-1, 2)

    def index_of_params(self, u: float, v: float) -> tuple[float, float]:
        """Real grid index of the parameter point ``(u, v)``."""
        du, dv = self.steps
        return (self.grid_i[0] + (u - self.params_u[0]) / du,
                self.grid_j[0] + (v - self.params_v[0]) / dv)

    def metadata(self) -> dict:
        return {"n": self.n, "n_v": self.n_v, "offsets": list(map(float, self.offset)),
                "lambda": float(self.lam), "domain": list(map(float, self.domain)),
                "shape": list(self.shape)}


def discretize_surface(surface: ParametricSurface, n: int, offset=(0.0, 0.0),
                       origin=(0.0, 0.0, 0.0), n_v: Optional[int] = None,
                       center: Optional[Sequence[float]] = None,
                       window: Optional[tuple[int, int, int, int]] = None) -> PolyhedralPatch:
    """Equidistant grid patch of ``surface``, triangulated by the diagonal rule.

    Parameters
    ----------
    n, n_v : int
        Number of steps along ``u`` and ``v`` (``n_v`` defaults to ``n``).
    offset : pair of floats in [0, 1)
        Fractional grid shift.
    center : parameter pair, optional
        Parameter point from which grid indices are measured (default: the
        parameter origin ``(0, 0)``).
    window : (a0, a1, b0, b1), optional
        Only build array positions ``a0 <= a <= a1``, ``b0 <= b <= b1``;
        see :func:`window_positions`.
    """
    n_v = n if n_v is None else n_v
    for m in (n, n_v):
        if int(m) != m or m < 3:
            raise DiscretizationError(f"n too small: need n >= 3, got {m}")
    ou, ov = map(float, offset)
    if not (0.0 <= ou < 1.0 and 0.0 <= ov < 1.0):
        raise DiscretizationError(f"offsets must lie in [0, 1), got {offset}")
    u1, u2, v1, v2 = surface.domain
    du, dv = (u2 - u1) / n, (v2 - v1) / n_v
    a_all = np.arange(n + 1)
    b_all = np.arange(n_v + 1)
    a_all = a_all[u1 + (a_all + ou) * du <= u2 + 1e-12 * du]
    b_all = b_all[v1 + (b_all + ov) * dv <= v2 + 1e-12 * dv]
    if window is not None:
        a0, a1, b0, b1 = window
        if a0 < a_all[0] or a1 > a_all[-1] or b0 < b_all[0] or b1 > b_all[-1]:
            raise DiscretizationError(f"window {window} exceeds the grid "
                                      f"[{a_all[0]}, {a_all[-1]}] x [{b_all[0]}, {b_all[-1]}]")
        a_all = np.arange(a0, a1 + 1)
        b_all = np.arange(b0, b1 + 1)
    if len(a_all) < 2 or len(b_all) < 2:
        raise DiscretizationError("grid has fewer than two vertices per direction")
    pu = u1 + (a_all + ou) * du
    pv = v1 + (b_all + ov) * dv
    verts = surface(pu[:, None], pv[None, :])
    if not np.all(np.isfinite(verts)):
        raise GeometryError("non-finite surface samples")
    o = np.asarray(origin, dtype=float)
    try:
        diag = diagonal_signs(verts[:-1, :-1], verts[1:, :-1], verts[1:, 1:], verts[:-1, 1:], o)
    except NonConvexError as exc:
        raise NonConvexError(f"{exc} (array positions relative to a={a_all[0]}, b={b_all[0]})") from exc
    _check_faces(verts, diag)
    cu, cv = (0.0, 0.0) if center is None else map(float, center)
    return PolyhedralPatch(
        vertices=verts, params_u=pu, params_v=pv,
        grid_i=(pu - cu) / du, grid_j=(pv - cv) / dv, diagonals=diag,
        offset=(ou, ov), lam=dv / du, n=int(n), n_v=int(n_v), domain=surface.domain,
        origin=o, steps=(du, dv),
    )


def window_positions(surface: ParametricSurface, n: int, offset, center, K: int, margin: int = 2,
                     n_v: Optional[int] = None) -> tuple[int, int, int, int]:
    """Array-position window covering grid indices within ``K + margin`` of
    the parameter point ``center``."""
    n_v = n if n_v is None else n_v
    u1, u2, v1, v2 = surface.domain
    du, dv = (u2 - u1) / n, (v2 - v1) / n_v
    ca = (center[0] - u1) / du - offset[0]
    cb = (center[1] - v1) / dv - offset[1]
    r = K + margin
    return (int(math.floor(ca - r)), int(math.ceil(ca + r)),
            int(math.floor(cb - r)), int(math.ceil(cb + r)))


def _check_faces(verts, diag):
    p00, p10, p11, p01 = verts[:-1, :-1], verts[1:, :-1], verts[1:, 1:], verts[:-1, 1:]
    plus = diag >= 0
    t1 = np.where(plus[..., None], np.cross(p10 - p00, p11 - p00), np.cross(p10 - p00, p01 - p00))
    t2 = np.where(plus[..., None], np.cross(p01 - p11, p00 - p11), np.cross(p11 - p10, p01 - p10))
    scale = np.linalg.norm(p10 - p00, axis=-1) * np.linalg.norm(p01 - p00, axis=-1)
    for t in (t1, t2):
        small = np.linalg.norm(t, axis=-1) <= 1e-12 * scale
        if np.any(small):
            a, b = np.argwhere(small)[0]
            raise DiscretizationError(f"degenerate triangle in quad at array position ({a}, {b})")


# ---------------------------------------------------------------------------
# Closed hulls
# ---------------------------------------------------------------------------


@dataclass
class ClosedHullMesh:
    """Closed convex triangle mesh with outward-oriented faces.

    ``facets`` groups coplanar triangles into convex polygons (vertex ids in
    counterclockwise order seen from outside); classification works on
    facets so that a flat polygon is one cell, not several.
    """

    vertices: NDArray
    faces: NDArray
    facets: list
    facet_of_face: NDArray
    provenance: str = "hull-of-samples"

    @property
    def n_edges(self) -> int:
        e = np.sort(np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]]), axis=1)
        return len(np.unique(e, axis=0))

    def euler_characteristic(self) -> int:
        return len(self.vertices) - self.n_edges + len(self.faces)

    def volume(self) -> float:
        v = self.vertices[self.faces]
        return float(_triple(v[:, 0], v[:, 1], v[:, 2]).sum() / 6.0)


def hull_of_samples(points, coplanar_tol: float = 1e-10) -> ClosedHullMesh:
    """Convex hull of a point cloud (Qhull via :mod:`scipy.spatial`).

    Adjacent hull triangles whose planes agree within ``coplanar_tol``
    (relative to the cloud diameter) are merged into polygonal facets.
    """
    from scipy.spatial import ConvexHull, QhullError

    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 4:
        raise GeometryError("need at least 4 points for a hull")
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise GeometryError(f"degenerate point set (coplanar or collinear): {exc}".splitlines()[0]) from exc

    used = np.unique(hull.simplices)
    remap = -np.ones(len(pts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    verts = pts[used]
    faces = remap[hull.simplices]
    normals = hull.equations[:, :3]
    offs = hull.equations[:, 3]
    # outward orientation
    tri = verts[faces]
    nrm = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    flip = np.einsum("ij,ij->i", nrm, normals) < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]

    diam = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    worst = max(float((pts[k:k + 2048] @ normals.T + offs).max()) for k in range(0, len(pts), 2048))
    if worst > 1e-9 * diam:
        raise GeometryError("hull does not contain all samples (numerical failure)")

    # merge coplanar neighbours (union-find over the qhull adjacency)
    parent = np.arange(len(faces))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for f, nbrs in enumerate(hull.neighbors):
        for g in nbrs:
            if g > f and np.linalg.norm(normals[f] - normals[g]) <= coplanar_tol \
                    and abs(offs[f] - offs[g]) <= coplanar_tol * diam:
                rf, rg = find(f), find(g)
                if rf != rg:
                    parent[max(rf, rg)] = min(rf, rg)
    roots = np.array([find(f) for f in range(len(faces))])
    _, facet_of_face = np.unique(roots, return_inverse=True)
    facets = _facet_polygons(faces, facet_of_face)
    return ClosedHullMesh(verts, faces, facets, facet_of_face)


def merge_coplanar_faces(vertices, faces, coplanar_tol: float = 1e-10) -> tuple[list, NDArray]:
    """Group edge-adjacent, consistently oriented coplanar triangles.

    Returns ``(facets, facet_of_face)`` as in :class:`ClosedHullMesh`.  Two
    triangles sharing an edge are merged when their unit normals differ by
    at most ``coplanar_tol`` and their plane offsets by at most
    ``coplanar_tol`` times the mesh diameter.
    """
    v = np.asarray(vertices, dtype=float)
    f = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    tri = v[f]
    nrm = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    ln = np.linalg.norm(nrm, axis=1)
    if np.any(ln == 0):
        raise GeometryError("zero-area triangle")
    nrm = nrm / ln[:, None]
    off = np.einsum("ij,ij->i", nrm, tri[:, 0])
    diam = float(np.linalg.norm(v.max(axis=0) - v.min(axis=0))) if len(v) else 0.0
    parent = np.arange(len(f))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    owner: dict[tuple, int] = {}
    for k, (a, b, c) in enumerate(f):
        for e in ((a, b), (b, c), (c, a)):
            owner[(int(e[0]), int(e[1]))] = k
    for (a, b), k in owner.items():
        g = owner.get((b, a))
        if g is None or g <= k:
            continue
        if np.linalg.norm(nrm[k] - nrm[g]) <= coplanar_tol and abs(off[k] - off[g]) <= coplanar_tol * diam:
            rk, rg = find(k), find(g)
            if rk != rg:
                parent[max(rk, rg)] = min(rk, rg)
    roots = np.array([find(k) for k in range(len(f))])
    _, facet_of_face = np.unique(roots, return_inverse=True)
    return _facet_polygons(f, facet_of_face), facet_of_face


def _facet_polygons(faces, facet_of_face) -> list:
    groups: dict[int, list] = {}
    for f, g in enumerate(facet_of_face):
        groups.setdefault(int(g), []).append(f)
    out = []
    for g in range(len(groups)):
        fs = groups[g]
        if len(fs) == 1:
            out.append(tuple(int(x) for x in faces[fs[0]]))
            continue
        half = set()
        for f in fs:
            a, b, c = (int(x) for x in faces[f])
            for e in ((a, b), (b, c), (c, a)):
                if (e[1], e[0]) in half:
                    half.remove((e[1], e[0]))
                else:
                    half.add(e)
        nxt = dict(half)
        if len(nxt) != len(half):
            raise GeometryError("non-simple coplanar facet")
        start = min(nxt)
        loop, cur = [start], nxt[start]
        while cur != start:
            loop.append(cur)
            cur = nxt[cur]
            if len(loop) > len(half):
                raise GeometryError("broken facet boundary")
        out.append(tuple(loop))
    return out


def angular_samples(surface_or_axes, n_u: int, n_v: int) -> NDArray:
    """Samples of an ellipsoid-like chart on an ``n_u x n_v`` angular grid.

    ``surface_or_axes`` is either a ``ParametricSurface`` with a periodic
    latitude/longitude chart or a triple of semi-axes.  Latitudes are cell
    centred, and the two poles are added once each, so no sample repeats.
    """
    if isinstance(surface_or_axes, ParametricSurface):
        s = surface_or_axes
        u1, u2, v1, v2 = s.domain
        u = u1 + (np.arange(n_u) + 0.5) * (u2 - u1) / n_u
        v = v1 + (np.arange(n_v) + 0.5) * (v2 - v1) / n_v
        pts = s(u[:, None], v[None, :]).reshape(-1, 3)
        return pts
    a, b, c = map(float, surface_or_axes)
    u = 2 * np.pi * np.arange(n_u) / n_u
    v = -np.pi / 2 + np.pi * (np.arange(n_v) + 0.5) / n_v
    cu, su = np.cos(u)[:, None], np.sin(u)[:, None]
    cv, sv = np.cos(v)[None, :], np.sin(v)[None, :]
    pts = np.stack([a * cv * cu, b * cv * su, c * sv * np.ones_like(cu)], axis=-1).reshape(-1, 3)
    return np.vstack([pts, [[0, 0, c], [0, 0, -c]]])
