"""Smooth-side geometry: derivative jets, fundamental forms, curvatures and
the equilibrium points of parametric curves and surfaces.

Sign conventions
----------------
Normals are oriented away from the reference point (the "origin" argument of
every function here).  With that orientation a convex surface that encloses
the reference point has ``L, N <= 0`` and non-positive principal curvatures;
plane curves follow the same rule (``kappa <= 0`` on a convex curve around the
reference point).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateError, GeometryError, NonConvexError

log = logging.getLogger(__name__)

STABLE = "stable"
SADDLE = "saddle"
UNSTABLE = "unstable"
DEGENERATE = "degenerate"

FD_STEP = 1e-4          # relative to the domain side
FD_CURVE_STEP = 1e-3    # curves also need a third derivative
FD_HALVING_TOL = 1e-5


# ---------------------------------------------------------------------------
# Parametric objects
# ---------------------------------------------------------------------------


def _evaluate(func, *args, dim):
    """Call ``func`` with array arguments; fall back to a Python loop for
    callbacks that are not vectorized."""
    arrays = np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in args])
    shape = arrays[0].shape
    try:
        out = np.asarray(func(*arrays), dtype=float)
        if out.shape == shape + (dim,):
            return out
    except (TypeError, ValueError):
        pass
    flat = [a.ravel() for a in arrays]
    out = np.array([func(*vals) for vals in zip(*flat)], dtype=float)
    return out.reshape(shape + (dim,))


@dataclass
class ParametricCurve:
    """A C^3 plane curve ``r : [t1, t2] -> R^2``.

    ``func`` should broadcast over array input and return ``(..., 2)``.
    ``derivs(t)`` may return the tuple ``(r, r', r'', r''')`` analytically.
    """

    func: Callable
    domain: tuple[float, float]
    derivs: Optional[Callable] = None
    closed: bool = False
    name: str = "curve"

    def __post_init__(self):
        t1, t2 = map(float, self.domain)
        if not t2 > t1:
            raise GeometryError(f"empty curve domain {self.domain}")
        self.domain = (t1, t2)

    def __call__(self, t) -> NDArray:
        return _evaluate(self.func, t, dim=2)

    @property
    def length(self) -> float:
        return self.domain[1] - self.domain[0]

    def jet(self, t: float) -> tuple[NDArray, NDArray, NDArray, NDArray]:
        """Position and first three derivatives at ``t``."""
        t = float(t)
        t1, t2 = self.domain
        if self.derivs is not None:
            if not self.closed and not (t1 <= t <= t2):
                raise GeometryError(f"parameter {t} outside {self.domain}")
            out = tuple(np.asarray(x, dtype=float) for x in self.derivs(t))
        else:
            h = FD_CURVE_STEP * self.length
            if not self.closed and not (t1 + 4 * h <= t <= t2 - 4 * h):
                raise GeometryError(f"parameter {t} too close to the boundary of {self.domain}")
            out = _curve_fd(self, t, h)
        if not all(np.all(np.isfinite(x)) for x in out):
            raise GeometryError(f"non-finite curve evaluation at {t}")
        return out


def _curve_fd(curve, t, h):
    def stencil(h):
        offs = np.array([-2, -1, 0, 1, 2]) * h
        p = curve(t + offs)
        d1 = (p[3] - p[1]) / (2 * h)
        d2 = (p[3] - 2 * p[2] + p[1]) / h**2
        d3 = (p[4] - 2 * p[3] + 2 * p[1] - p[0]) / (2 * h**3)
        return p[2], d1, d2, d3

    r, a1, a2, a3 = stencil(h)
    _, b1, b2, b3 = stencil(h / 2)
    return (r, (4 * b1 - a1) / 3, (4 * b2 - a2) / 3, (4 * b3 - a3) / 3)


@dataclass
class Jet2:
    """Second-order jet of a surface at one parameter point."""

    position: NDArray
    r_u: NDArray
    r_v: NDArray
    r_uu: NDArray
    r_uv: NDArray
    r_vv: NDArray
    numeric: bool = False


@dataclass
class ParametricSurface:
    """A surface patch ``r : [u1,u2] x [v1,v2] -> R^3``.

    ``func(u, v)`` should broadcast and return ``(..., 3)``.  ``derivs(u, v)``
    may return ``(r, r_u, r_v, r_uu, r_uv, r_vv)`` analytically; otherwise
    jets come from Richardson-extrapolated central differences.
    ``periodic_u`` marks charts that wrap around in ``u`` (closed surfaces).
    """

    func: Callable
    domain: tuple[float, float, float, float]
    derivs: Optional[Callable] = None
    periodic_u: bool = False
    name: str = "surface"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        u1, u2, v1, v2 = map(float, self.domain)
        if not (u2 > u1 and v2 > v1):
            raise GeometryError(f"domain sides must be positive, got {self.domain}")
        self.domain = (u1, u2, v1, v2)

    def __call__(self, u, v) -> NDArray:
        return _evaluate(self.func, u, v, dim=3)

    @property
    def sides(self) -> tuple[float, float]:
        u1, u2, v1, v2 = self.domain
        return u2 - u1, v2 - v1

    def wrap(self, u: float) -> float:
        if not self.periodic_u:
            return u
        u1, u2 = self.domain[:2]
        return u1 + (u - u1) % (u2 - u1)


# ---------------------------------------------------------------------------
# Jets and fundamental forms
# ---------------------------------------------------------------------------


def jet(surface: ParametricSurface, u: float, v: float) -> Jet2:
    """Evaluate position, first and second partial derivatives at ``(u, v)``."""
    u, v = float(u), float(v)
    u1, u2, v1, v2 = surface.domain
    su, sv = surface.sides
    numeric = surface.derivs is None
    mu = 2 * FD_STEP * su if numeric else 0.0
    mv = 2 * FD_STEP * sv if numeric else 0.0
    inside_u = surface.periodic_u or (u1 + mu <= u <= u2 - mu)
    if not (inside_u and v1 + mv <= v <= v2 - mv):
        raise GeometryError(f"parameters ({u}, {v}) outside the domain {surface.domain}")

    if numeric:
        out = _surface_fd(surface, u, v)
    else:
        vals = [np.asarray(x, dtype=float) for x in surface.derivs(u, v)]
        out = Jet2(*vals, numeric=False)
    for name in ("position", "r_u", "r_v", "r_uu", "r_uv", "r_vv"):
        if not np.all(np.isfinite(getattr(out, name))):
            raise GeometryError(f"non-finite {name} at ({u}, {v})")
    return out


def _fd_pass(surface, u, v, hu, hv):
    du = np.array([-1, 0, 1]) * hu
    dv = np.array([-1, 0, 1]) * hv
    g = surface(u + du[:, None], v + dv[None, :])  # (3, 3, 3)
    r = g[1, 1]
    r_u = (g[2, 1] - g[0, 1]) / (2 * hu)
    r_v = (g[1, 2] - g[1, 0]) / (2 * hv)
    r_uu = (g[2, 1] - 2 * r + g[0, 1]) / hu**2
    r_vv = (g[1, 2] - 2 * r + g[1, 0]) / hv**2
    r_uv = (g[2, 2] - g[2, 0] - g[0, 2] + g[0, 0]) / (4 * hu * hv)
    return r, np.array([r_u, r_v, r_uu, r_uv, r_vv])


def _richardson(surface, u, v, hu, hv):
    r, a = _fd_pass(surface, u, v, hu, hv)
    _, b = _fd_pass(surface, u, v, hu / 2, hv / 2)
    return r, (4 * b - a) / 3


def _surface_fd(surface, u, v) -> Jet2:
    su, sv = surface.sides
    hu, hv = FD_STEP * su, FD_STEP * sv
    r, d = _richardson(surface, u, v, hu, hv)
    for _ in range(3):
        _, d_half = _richardson(surface, u, v, hu / 2, hv / 2)
        rscale = max(np.linalg.norm(r), 1e-300)
        scales = np.array([
            max(np.linalg.norm(d[0]), rscale / su),
            max(np.linalg.norm(d[1]), rscale / sv),
            max(np.linalg.norm(d[2]), rscale / su**2),
            max(np.linalg.norm(d[3]), rscale / (su * sv)),
            max(np.linalg.norm(d[4]), rscale / sv**2),
        ])
        change = np.linalg.norm(d - d_half, axis=1) / scales
        if np.all(change < FD_HALVING_TOL):
            d = d_half
            break
        hu, hv, d = hu / 2, hv / 2, d_half
    else:
        log.warning("finite-difference jet at (%g, %g) did not settle (change %s)", u, v, change)
    return Jet2(r, d[0], d[1], d[2], d[3], d[4], numeric=True)


@dataclass
class FundamentalForms:
    """First (E, F, G) and second (L, M, N) fundamental quantities.

    The second form is measured against ``normal``, the unit normal pointing
    away from the reference point; ``flipped`` records whether ``r_u x r_v``
    had to be reversed to achieve that.
    """

    E: float
    F: float
    G: float
    L: float
    M: float
    N: float
    normal: NDArray
    flipped: bool = False

    @property
    def det_first(self) -> float:
        return self.E * self.G - self.F**2

    def check_convex(self, tol: float = 1e-12) -> None:
        """Raise :class:`NonConvexError` unless L, N <= 0 and LN - M^2 >= 0."""
        scale = tol * max(abs(self.L), abs(self.M), abs(self.N), 1e-300)
        if self.L > scale or self.N > scale or self.L * self.N - self.M**2 < -scale * scale / tol:
            raise NonConvexError(
                f"second fundamental form (L={self.L:.6g}, M={self.M:.6g}, N={self.N:.6g}) "
                "is not that of a convex patch")


def fundamental_forms(j: Jet2, origin: Sequence[float] = (0.0, 0.0, 0.0)) -> FundamentalForms:
    cross = np.cross(j.r_u, j.r_v)
    norm = np.linalg.norm(cross)
    if norm <= 1e-12 * np.linalg.norm(j.r_u) * np.linalg.norm(j.r_v) or norm == 0.0:
        raise GeometryError("degenerate tangent plane (r_u x r_v = 0)")
    normal = cross / norm
    flipped = bool(np.dot(normal, j.position - np.asarray(origin, dtype=float)) < 0)
    if flipped:
        normal = -normal
    return FundamentalForms(
        E=float(j.r_u @ j.r_u), F=float(j.r_u @ j.r_v), G=float(j.r_v @ j.r_v),
        L=float(normal @ j.r_uu), M=float(normal @ j.r_uv), N=float(normal @ j.r_vv),
        normal=normal, flipped=flipped,
    )


def curvature_invariants(f: FundamentalForms) -> tuple[float, float]:
    """Return ``(k1*k2, k1+k2)``."""
    det = f.det_first
    if not det > 0:
        raise GeometryError("first fundamental form is not positive definite")
    gauss = (f.L * f.N - f.M**2) / det
    mean_sum = (f.E * f.N - 2 * f.F * f.M + f.G * f.L) / det
    return gauss, mean_sum


def principal_curvatures(f: FundamentalForms) -> tuple[float, float]:
    """Principal curvatures ``k1 <= k2`` (roots of x^2 - (k1+k2) x + k1 k2)."""
    gauss, mean_sum = curvature_invariants(f)
    disc = mean_sum**2 - 4 * gauss
    if disc < 0:
        # only round-off can make this negative
        if disc < -1e-9 * max(1.0, mean_sum**2):
            raise GeometryError(f"complex principal curvatures (discriminant {disc:g})")
        disc = 0.0
    root = math.sqrt(disc)
    return (mean_sum - root) / 2, (mean_sum + root) / 2


# ---------------------------------------------------------------------------
# Smooth equilibria
# ---------------------------------------------------------------------------


def degeneracy_tol(rho: float, kappa: float) -> float:
    return 1e-8 * max(1.0, rho * abs(kappa))


def classify_smooth(rho: float, k1: float, k2: Optional[float] = None, tol: Optional[float] = None) -> str:
    """Type of a smooth equilibrium from the signs of ``rho*k_i + 1``.

    Two positive factors give a stable point, one a saddle, none an unstable
    point.  Pass ``k2=None`` for plane curves (one factor: stable/unstable).
    """
    if not rho > 0:
        raise GeometryError("rho must be positive")
    kappas = [k1] if k2 is None else [k1, k2]
    positive = 0
    for k in kappas:
        t = degeneracy_tol(rho, k) if tol is None else tol
        factor = rho * k + 1
        if abs(factor) < t:
            return DEGENERATE
        positive += factor > 0
    if k2 is None:
        return STABLE if positive else UNSTABLE
    return (UNSTABLE, SADDLE, STABLE)[positive]


@dataclass
class SmoothEquilibrium:
    """A critical point of the distance to the reference point."""

    params: tuple
    position: NDArray
    rho: float
    kappas: tuple
    kind: str
    degenerate: bool = False
    forms: Optional[FundamentalForms] = None
    residual: float = 0.0

    def to_dict(self) -> dict:
        return {
            "params": [float(p) for p in self.params],
            "position": [float(x) for x in self.position],
            "rho": float(self.rho),
            "kappas": [float(k) for k in self.kappas],
            "kind": self.kind,
            "degenerate": bool(self.degenerate),
        }


def equilibrium_at(surface: ParametricSurface, u: float, v: float,
                   origin: Sequence[float] = (0.0, 0.0, 0.0)) -> SmoothEquilibrium:
    """Describe the (assumed) equilibrium at parameters ``(u, v)``."""
    o = np.asarray(origin, dtype=float)
    j = jet(surface, u, v)
    forms = fundamental_forms(j, o)
    k1, k2 = principal_curvatures(forms)
    rel = j.position - o
    rho = float(np.linalg.norm(rel))
    kind = classify_smooth(rho, k1, k2)
    res = math.hypot(rel @ j.r_u, rel @ j.r_v)
    return SmoothEquilibrium((float(u), float(v)), j.position, rho, (k1, k2),
                             kind, kind == DEGENERATE, forms, res)


_KIND_ORDER = {STABLE: 0, SADDLE: 1, UNSTABLE: 2, DEGENERATE: 3}


def find_smooth_equilibria(surface: ParametricSurface, origin: Sequence[float] = (0.0, 0.0, 0.0),
                           grid_seeds: int = 8, max_iter: int = 60) -> list[SmoothEquilibrium]:
    """Locate the critical points of ``|r(u,v) - origin|`` by Newton iteration.

    Newton runs on ``(<r-o, r_u>, <r-o, r_v>)`` from a ``grid_seeds`` x
    ``grid_seeds`` grid of cell-centred seeds.  Roots closer than
    ``1e-6 * domain diagonal`` in parameter space are merged.  Seeds whose
    iteration leaves the domain or stalls are dropped.
    """
    if grid_seeds < 4:
        raise GeometryError("grid_seeds must be at least 4 per dimension")
    o = np.asarray(origin, dtype=float)
    u1, u2, v1, v2 = surface.domain
    su, sv = surface.sides
    diag = math.hypot(su, sv)
    seeds = [(u1 + (a + 0.5) * su / grid_seeds, v1 + (b + 0.5) * sv / grid_seeds)
             for a in range(grid_seeds) for b in range(grid_seeds)]
    roots: list[tuple[float, float, float, bool]] = []
    for seed in seeds:
        found = _newton_surface(surface, o, seed, max_iter)
        if found is None:
            continue
        u, v, res, singular = found
        if any(_param_dist(surface, (u, v), (r[0], r[1])) < 1e-6 * diag for r in roots):
            continue
        roots.append((u, v, res, singular))

    out = []
    for u, v, res, singular in roots:
        eq = equilibrium_at(surface, u, v, o)
        eq.residual = res
        if singular:
            eq.degenerate = True
            eq.kind = DEGENERATE
        out.append(eq)
    out.sort(key=lambda e: (_KIND_ORDER[e.kind], e.params))
    return out


def _param_dist(surface, a, b):
    du = abs(a[0] - b[0])
    if surface.periodic_u:
        period = surface.sides[0]
        du = min(du % period, period - du % period)
    return math.hypot(du, a[1] - b[1])


def _newton_surface(surface, o, seed, max_iter):
    u, v = seed
    su, sv = surface.sides
    for _ in range(max_iter):
        try:
            j = jet(surface, u, v)
        except GeometryError:
            return None
        rel = j.position - o
        g = np.array([rel @ j.r_u, rel @ j.r_v])
        hess = np.array([[j.r_u @ j.r_u + rel @ j.r_uu, j.r_u @ j.r_v + rel @ j.r_uv],
                         [j.r_u @ j.r_v + rel @ j.r_uv, j.r_v @ j.r_v + rel @ j.r_vv]])
        nrel = np.linalg.norm(rel)
        scale = nrel * np.array([np.linalg.norm(j.r_u), np.linalg.norm(j.r_v)])
        singular = abs(np.linalg.det(hess)) < 1e-8 * (j.r_u @ j.r_u) * (j.r_v @ j.r_v)
        if np.all(np.abs(g) <= 1e-10 * scale):
            return surface.wrap(u), v, float(np.linalg.norm(g)), bool(singular)
        if singular:
            return None
        step = np.linalg.solve(hess, -g)
        # keep single steps inside a quarter of the domain
        limit = 0.25 * np.array([su, sv])
        factor = min(1.0, *(limit / np.maximum(np.abs(step), 1e-300)))
        u, v = surface.wrap(u + factor * step[0]), v + factor * step[1]
    return None


# ---------------------------------------------------------------------------
# Plane curves
# ---------------------------------------------------------------------------


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def signed_curvature(curve: ParametricCurve, t: float, origin: Sequence[float] = (0.0, 0.0)) -> float:
    """Curvature at ``t`` with the sign fixed by the reference point.

    Equals ``(x'y'' - x''y') / |r'|^3`` for clockwise traversal around
    ``origin`` and its negative otherwise, so a convex curve enclosing the
    reference point always gets ``kappa <= 0``.
    """
    r, d1, d2, _ = curve.jet(t)
    speed = np.linalg.norm(d1)
    if speed <= 1e-14 * max(1.0, np.linalg.norm(r)):
        raise GeometryError(f"singular parametrization at t={t}")
    k = _cross2(d1, d2) / speed**3
    turning = _cross2(r - np.asarray(origin, dtype=float), d1)
    return float(-k if turning > 0 else k)


def curve_equilibrium_at(curve: ParametricCurve, t: float,
                         origin: Sequence[float] = (0.0, 0.0)) -> SmoothEquilibrium:
    o = np.asarray(origin, dtype=float)
    r, d1, _, _ = curve.jet(t)
    rho = float(np.linalg.norm(r - o))
    kappa = signed_curvature(curve, t, o)
    kind = classify_smooth(rho, kappa)
    res = abs(float((r - o) @ d1))
    return SmoothEquilibrium((float(t),), r, rho, (kappa,), kind, kind == DEGENERATE, None, res)


def find_curve_equilibria(curve: ParametricCurve, origin: Sequence[float] = (0.0, 0.0),
                          seeds: int = 32, max_iter: int = 60) -> list[SmoothEquilibrium]:
    """1-D analogue of :func:`find_smooth_equilibria`."""
    o = np.asarray(origin, dtype=float)
    t1, t2 = curve.domain
    length = curve.length
    roots: list[tuple[float, float]] = []
    for a in range(seeds):
        t = t1 + (a + 0.5) * length / seeds
        for _ in range(max_iter):
            try:
                r, d1, d2, _ = curve.jet(t)
            except GeometryError:
                t = None
                break
            rel = r - o
            g = rel @ d1
            if abs(g) <= 1e-10 * np.linalg.norm(rel) * np.linalg.norm(d1):
                break
            dg = d1 @ d1 + rel @ d2
            if abs(dg) < 1e-14 * (d1 @ d1):
                t = None
                break
            step = -g / dg
            step = max(-0.25 * length, min(0.25 * length, step))
            t = t + step
            if curve.closed:
                t = t1 + (t - t1) % length
        else:
            t = None
        if t is None:
            continue
        dist = [min(abs(t - s), length - abs(t - s)) if curve.closed else abs(t - s) for s, _ in roots]
        if any(d < 1e-6 * length for d in dist):
            continue
        roots.append((t, 0.0))
    out = [curve_equilibrium_at(curve, t, o) for t, _ in roots]
    out.sort(key=lambda e: e.params)
    return out


def require_generic(rho: float, kappas: Sequence[float]) -> None:
    for k in kappas:
        if abs(rho * k + 1) < degeneracy_tol(rho, k):
            raise DegenerateError(f"rho*kappa + 1 vanishes (rho={rho:g}, kappa={k:g})")
