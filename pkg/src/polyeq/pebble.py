"""Equilibrium census of closed triangle meshes ("pebbles").

Pipeline: solid centroid -> convex hull of the vertices -> equilibrium
classification on the hull -> proximity clustering into flocks -> per flock
curvature estimate and imaginary indices.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .classify import EquilibriumSet, classify_patch, poincare_hopf
from .discretize import ClosedHullMesh, hull_of_samples
from .errors import DegenerateError, GeometryError
from .geometry import FundamentalForms, principal_curvatures
from .indices import imaginary_indices_3d
from .meshio import TriangleMesh

log = logging.getLogger(__name__)


def _edges(faces: NDArray) -> NDArray:
    return np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])


def check_watertight(faces: NDArray) -> None:
    """Every directed edge must appear exactly once and its reverse once."""
    e = _edges(np.asarray(faces))
    keys = e[:, 0] * (e.max() + 1) + e[:, 1]
    uniq, cnt = np.unique(keys, return_counts=True)
    if np.any(cnt != 1):
        raise GeometryError("mesh is not consistently oriented (repeated directed edge)")
    rev = e[:, 1] * (e.max() + 1) + e[:, 0]
    if not np.all(np.isin(rev, uniq)):
        raise GeometryError("mesh is not watertight (boundary edge found)")


def solid_centroid(mesh: TriangleMesh, check: bool = True) -> NDArray:
    """Centroid of the homogeneous solid bounded by a closed oriented mesh.

    Decomposes the solid into signed tetrahedra with apex at the mean vertex.
    """
    if check:
        check_watertight(mesh.faces)
    v = mesh.vertices
    apex = v.mean(axis=0)
    t = v[mesh.faces] - apex
    vol = np.einsum("ij,ij->i", t[:, 0], np.cross(t[:, 1], t[:, 2])) / 6.0
    total = vol.sum()
    scale = float(np.ptp(v, axis=0).max()) ** 3
    if abs(total) <= 1e-12 * scale:
        raise GeometryError("mesh encloses (near) zero volume")
    c = (vol[:, None] * (t.sum(axis=1) / 4.0)).sum(axis=0) / total
    return c + apex


def vertex_adjacency(n_vertices: int, faces: NDArray) -> list[set]:
    adj = [set() for _ in range(n_vertices)]
    for a, b in _edges(np.asarray(faces)):
        adj[int(a)].add(int(b))
        adj[int(b)].add(int(a))
    return adj


def ring_neighbors(adj: list[set], start, rings: int) -> dict:
    """Vertices within ``rings`` hops of the vertex set ``start`` -> hop count."""
    dist = {int(s): 0 for s in np.atleast_1d(start)}
    queue = deque(dist)
    while queue:
        x = queue.popleft()
        if dist[x] >= rings:
            continue
        for y in adj[x]:
            if y not in dist:
                dist[y] = dist[x] + 1
                queue.append(y)
    return dist


@dataclass
class CurvatureEstimate:
    at: NDArray
    k1: float
    k2: float
    fit_residual: float
    neighborhood_radius: float
    low_confidence: bool = False


def estimate_curvatures(mesh: TriangleMesh, at_vertex: int, ring: int = 2, inside=None,
                        adjacency=None, normal=None) -> CurvatureEstimate:
    """Principal curvatures from a least-squares quadric fit.

    The fit ``z = (a x^2 + 2 b x y + c y^2)/2 + d x + e y`` uses the
    ``ring``-neighbourhood in a tangent frame built from the area-weighted
    vertex normal (or the given ``normal``).  The normal is oriented away
    from ``inside`` (default: the mean vertex), so convex surfaces get
    ``k1 <= k2 <= 0``.  ``adjacency`` overrides the vertex neighbourhoods
    derived from the triangles.
    """
    v = mesh.vertices
    faces = mesh.faces
    adj = adjacency if adjacency is not None else vertex_adjacency(len(v), faces)
    nb = [k for k, d in ring_neighbors(adj, at_vertex, ring).items() if d > 0]
    if len(nb) < 5:
        raise GeometryError(f"vertex {at_vertex} has only {len(nb)} neighbours within {ring} rings")
    p = v[at_vertex]
    if normal is None:
        inc = np.flatnonzero(np.any(faces == at_vertex, axis=1))
        tri = v[faces[inc]]
        normal = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]).sum(axis=0)
    normal = np.asarray(normal, dtype=float)
    ref = v.mean(axis=0) if inside is None else np.asarray(inside, dtype=float)
    if np.dot(normal, p - ref) < 0:
        normal = -normal
    nn = np.linalg.norm(normal)
    if nn == 0:
        raise GeometryError("vanishing vertex normal")
    n = normal / nn
    helper = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = np.cross(n, helper)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    q = v[nb] - p
    x, y, z = q @ t1, q @ t2, q @ n
    A = np.column_stack([0.5 * x * x, x * y, 0.5 * y * y, x, y])
    coef, _, rank, _ = np.linalg.lstsq(A, z, rcond=None)
    if rank < 5:
        raise GeometryError("rank-deficient curvature fit")
    a, b, c, d, e = coef
    resid = float(np.sqrt(np.mean((A @ coef - z) ** 2)))
    radius = float(np.sqrt(x * x + y * y).max())
    # graph z = f(x, y): first and second forms at the origin
    w = np.sqrt(1 + d * d + e * e)
    f = FundamentalForms(1 + d * d, d * e, 1 + e * e, a / w, b / w, c / w, n)
    k1, k2 = principal_curvatures(f)
    return CurvatureEstimate(p, k1, k2, resid, radius, low_confidence=resid > 0.05 * radius)


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


@dataclass
class FlockRow:
    flock: int
    S_star: float | None
    S: int
    U_star: float | None
    U: int
    N_star: float | None
    N: int
    location: NDArray
    rho: float
    kappas: tuple | None
    note: str = ""

    @property
    def identity(self) -> float | None:
        if self.S_star is None:
            return None
        return self.S_star + self.U_star - self.N_star

    def to_dict(self) -> dict:
        return {"flock": self.flock, "S_star": self.S_star, "S": self.S, "U_star": self.U_star,
                "U": self.U, "N_star": self.N_star, "N": self.N,
                "location": [float(x) for x in self.location], "rho": self.rho,
                "kappas": None if self.kappas is None else [float(k) for k in self.kappas],
                "identity": self.identity, "note": self.note}


@dataclass
class PebbleReport:
    rows: list
    census: tuple          # (S, U, N)
    poincare_hopf: int
    centroid: NDArray
    hull_stats: dict
    near_degenerate: list = field(default_factory=list)
    equilibria: EquilibriumSet | None = None
    hull: ClosedHullMesh | None = None

    def to_dict(self) -> dict:
        S, U, N = self.census
        return {"rows": [r.to_dict() for r in self.rows], "census": {"S": S, "U": U, "N": N},
                "poincare_hopf": self.poincare_hopf, "centroid": [float(x) for x in self.centroid],
                "hull": self.hull_stats,
                "near_degenerate": [[c[0]] + [int(x) for x in c[1:]] for c in self.near_degenerate]}

    def table_rows(self) -> list[list]:
        """Rows ``flock, S*, S, U*, U, N*, N`` (indices rounded to 2 decimals)."""
        def fmt(x):
            return "" if x is None else f"{x:.2f}"
        return [[r.flock, fmt(r.S_star), r.S, fmt(r.U_star), r.U, fmt(r.N_star), r.N] for r in self.rows]


def cluster_by_hops(eqs: EquilibriumSet, adj: list[set], hops: int = 3) -> list[list]:
    """Union of equilibria whose carriers are within ``hops`` edges."""
    pts = eqs.counted()
    owner: dict[int, list] = {}
    for k, p in enumerate(pts):
        for v in p.cell_vertices:
            owner.setdefault(int(v), []).append(k)
    parent = list(range(len(pts)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for k, p in enumerate(pts):
        for v in ring_neighbors(adj, list(p.cell_vertices), hops):
            for other in owner.get(v, ()):
                ra, rb = find(k), find(other)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list] = {}
    for k in range(len(pts)):
        groups.setdefault(find(k), []).append(pts[k])
    return list(groups.values())


def facet_adjacency(n_vertices: int, facets) -> list[set]:
    """Vertex adjacency along facet boundaries (diagonals inside a planar
    facet are not edges)."""
    adj = [set() for _ in range(n_vertices)]
    for f in facets:
        for t in range(len(f)):
            a, b = int(f[t]), int(f[(t + 1) % len(f)])
            adj[a].add(b)
            adj[b].add(a)
    return adj


def pebble_report(mesh: TriangleMesh, hops: int = 3, ring: int = 2, tol: float = 1e-10,
                  centroid=None, focal_tol: float = 0.05) -> PebbleReport:
    """Full equilibrium census of a closed mesh with per-flock predictions.

    Everything after the hull works on its polygonal facets, so the arbitrary
    triangulation of coplanar facets does not affect the report.  Flocks with
    ``min |1 + rho*kappa_i| < focal_tol`` sit too close to a focal point for
    estimated curvatures to resolve the denominator of ``d``; their rows carry
    a note and no predictions.
    """
    c = solid_centroid(mesh) if centroid is None else np.asarray(centroid, dtype=float)
    hull: ClosedHullMesh = hull_of_samples(mesh.vertices)
    eqs = classify_patch(hull, c, tol)
    hv, hf = hull.vertices, hull.faces
    adj = facet_adjacency(len(hv), hull.facets)
    groups = cluster_by_hops(eqs, adj, hops)

    tri = hv[hf]
    tri_vec = 0.5 * np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    n_facets = len(hull.facets)
    facet_vec = np.stack([np.bincount(hull.facet_of_face, weights=tri_vec[:, k], minlength=n_facets)
                          for k in range(3)], axis=1)
    facet_area = np.linalg.norm(facet_vec, axis=1)
    facets_of_vertex: list[list] = [[] for _ in range(len(hv))]
    for fi, f in enumerate(hull.facets):
        for v in f:
            facets_of_vertex[int(v)].append(fi)
    hull_tm = TriangleMesh(hv, hf)

    def weight(p) -> float:
        if p.carrier[0] == "face":
            return float(facet_area[p.carrier[1]])
        ids = set()
        for v in p.cell_vertices:
            ids.update(facets_of_vertex[v])
        return float(facet_area[list(ids)].sum()) if ids else 1.0

    rows = []
    for g in groups:
        w = np.array([weight(p) for p in g])
        loc = (w[:, None] * np.array([p.location for p in g])).sum(axis=0) / w.sum()
        rho = float(np.linalg.norm(loc - c))
        U = sum(p.kind == "unstable" for p in g)
        N = sum(p.kind == "saddle" for p in g)
        S = sum(p.kind == "stable" for p in g)
        nearest = int(np.argmin(np.linalg.norm(hv - loc, axis=1)))
        note, kap, idx = "", None, None
        try:
            est = estimate_curvatures(hull_tm, nearest, ring, inside=c, adjacency=adj,
                                      normal=facet_vec[facets_of_vertex[nearest]].sum(axis=0))
            kap = (est.k1, est.k2)
            if est.low_confidence:
                note = "low-confidence curvature fit"
            margin = min(abs(1 + rho * est.k1), abs(1 + rho * est.k2))
            if margin < focal_tol:
                note = f"near-focal: min|1+rho*kappa| = {margin:.3g}"
            else:
                idx = imaginary_indices_3d(rho, est.k1, est.k2)
        except DegenerateError:
            note = "degenerate rho*kappa+1"
        except GeometryError as exc:
            note = f"curvature estimate failed: {exc}"
        rows.append(FlockRow(0, None if idx is None else idx.S_star, S,
                             None if idx is None else idx.U_star, U,
                             None if idx is None else idx.N_star, N, loc, rho, kap, note))
    rows.sort(key=lambda r: (round(r.rho, 9), tuple(np.round(r.location, 9))))
    for k, r in enumerate(rows):
        r.flock = k
    U, N, S = eqs.counts
    stats = {"vertices": int(len(hv)), "triangles": int(len(hf)), "facets": int(len(hull.facets)),
             "input_vertices": int(len(mesh.vertices)), "volume": hull.volume()}
    return PebbleReport(rows, (S, U, N), poincare_hopf(eqs), c, stats, list(eqs.near_degenerate), eqs, hull)
