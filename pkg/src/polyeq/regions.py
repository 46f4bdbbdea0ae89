"""Planar convex regions: half-plane intersections, areas and lattice counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

BOUNDARY_TOL = 1e-12


def clip_halfplane(poly: NDArray, a: float, b: float, c: float) -> NDArray:
    """Clip the convex polygon ``poly`` (k x 2, counterclockwise) to the
    half-plane ``a x + b y + c >= 0`` (Sutherland-Hodgman, one edge)."""
    if len(poly) == 0:
        return poly
    s = poly @ np.array([a, b]) + c
    out = []
    k = len(poly)
    for idx in range(k):
        p, q = poly[idx], poly[(idx + 1) % k]
        sp, sq = s[idx], s[(idx + 1) % k]
        if sp >= 0:
            out.append(p)
        if (sp >= 0) != (sq >= 0):
            t = sp / (sp - sq)
            out.append(p + t * (q - p))
    return np.array(out) if out else np.zeros((0, 2))


def polygon_area(poly: NDArray) -> float:
    """Signed shoelace area (positive for counterclockwise order)."""
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass
class ConvexPolygon:
    """Convex polygon given by counterclockwise vertices.

    ``halfplanes`` holds rows ``(a, b, c)`` meaning ``a x + b y + c > 0``
    inside; for polygons built by :meth:`from_halfplanes` they are the
    original (unnormalized) constraints.
    """

    vertices: NDArray
    halfplanes: NDArray

    @classmethod
    def from_vertices(cls, vertices) -> "ConvexPolygon":
        v = np.asarray(vertices, dtype=float).reshape(-1, 2)
        if polygon_area(v) < 0:
            v = v[::-1]
        nxt = np.roll(v, -1, axis=0)
        d = nxt - v
        # inward normal of a counterclockwise edge is (-dy, dx)
        a, b = -d[:, 1], d[:, 0]
        c = -(a * v[:, 0] + b * v[:, 1])
        return cls(v, np.column_stack([a, b, c]))

    @classmethod
    def from_halfplanes(cls, rows, bound: float | None = None) -> "ConvexPolygon":
        """Intersection of ``a x + b y + c > 0`` constraints.

        The result is clipped from a square of half side ``bound`` (default:
        generous multiple of the constraint offsets); an unbounded region is
        therefore reported with vertices on that square.
        """
        h = np.asarray(rows, dtype=float).reshape(-1, 3)
        if bound is None:
            ab = np.hypot(h[:, 0], h[:, 1])
            nz = ab > 0
            bound = 1e3 * max(1.0, float(np.max(np.abs(h[nz, 2]) / ab[nz]))) if nz.any() else 1e3
        for _ in range(8):
            poly = np.array([[-bound, -bound], [bound, -bound], [bound, bound], [-bound, bound]])
            for a, b, c in h:
                poly = clip_halfplane(poly, a, b, c)
                if len(poly) == 0:
                    break
            # grow the box while the region still touches it
            if len(poly) == 0 or np.max(np.abs(poly)) < 0.5 * bound:
                break
            bound *= 1e3
        return cls(poly, h)

    @property
    def area(self) -> float:
        return abs(polygon_area(self.vertices))

    @property
    def empty(self) -> bool:
        return len(self.vertices) < 3 or self.area == 0.0

    def bbox(self) -> tuple[NDArray, NDArray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def slack(self, pts: NDArray) -> NDArray:
        """Normalized constraint values, shape ``pts.shape[:-1] + (m,)``."""
        h = self.halfplanes
        norm = np.hypot(h[:, 0], h[:, 1])
        norm = np.where(norm > 0, norm, 1.0)
        return (pts @ h[:, :2].T + h[:, 2]) / norm

    def contains(self, pts, tol: float = BOUNDARY_TOL) -> NDArray:
        return np.all(self.slack(np.asarray(pts, dtype=float)) > tol, axis=-1)

    def transformed(self, T: NDArray, shift=(0.0, 0.0)) -> "ConvexPolygon":
        """Image under ``x -> T x + shift``."""
        T = np.asarray(T, dtype=float)
        return ConvexPolygon.from_vertices(self.vertices @ T.T + np.asarray(shift, dtype=float))

    def to_list(self) -> list:
        return [[float(x), float(y)] for x, y in self.vertices]


@dataclass
class Disk:
    center: NDArray
    radius: float

    @property
    def area(self) -> float:
        return float(np.pi * self.radius**2)

    def bbox(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius

    def slack(self, pts):
        d = np.linalg.norm(np.asarray(pts, float) - np.asarray(self.center, float), axis=-1)
        return (self.radius - d)[..., None]

    def contains(self, pts, tol: float = BOUNDARY_TOL):
        return np.all(self.slack(pts) > tol, axis=-1)


def lattice_points(region, translation=(0.0, 0.0), tol: float = BOUNDARY_TOL):
    """Integer points ``z`` with ``z - translation`` strictly inside ``region``.

    Returns ``(points, boundary_hits)`` where ``boundary_hits`` counts lattice
    points within ``tol`` of the boundary (these are not included).
    """
    t = np.asarray(translation, dtype=float)
    lo, hi = region.bbox()
    lo, hi = lo + t, hi + t
    xs = np.arange(np.floor(lo[0]), np.ceil(hi[0]) + 1)
    ys = np.arange(np.floor(lo[1]), np.ceil(hi[1]) + 1)
    grid = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    s = region.slack(grid - t)
    inside = np.all(s > tol, axis=-1)
    near = np.all(s > -tol, axis=-1) & ~inside
    return grid[inside].astype(int), int(near.sum())


def lattice_count(region, translation=(0.0, 0.0), tol: float = BOUNDARY_TOL) -> int:
    """Number of integer points in ``translation + region`` (strict interior)."""
    return len(lattice_points(region, translation, tol)[0])


def lattice_counts_many(region, translations: NDArray, tol: float = BOUNDARY_TOL,
                        chunk: int = 20000) -> NDArray:
    """Vectorized :func:`lattice_count` for translations in ``[0, 1)^2``."""
    tr = np.asarray(translations, dtype=float).reshape(-1, 2)
    lo, hi = region.bbox()
    xs = np.arange(np.floor(lo[0]), np.ceil(hi[0]) + 2)
    ys = np.arange(np.floor(lo[1]), np.ceil(hi[1]) + 2)
    grid = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    out = np.empty(len(tr), dtype=np.int64)
    for start in range(0, len(tr), chunk):
        t = tr[start:start + chunk]
        pts = grid[None, :, :] - t[:, None, :]
        out[start:start + chunk] = region.contains(pts, tol).sum(axis=1)
    return out
