"""Flock counting, lattice-point experiments and running averages.

* :func:`window_counts` / :func:`counts_2d` count equilibria of a grid patch
  (or polygon) near a smooth equilibrium;
* :func:`flock_report_patch` compares such counts with the imaginary indices
  and their error bounds;
* :func:`cluster_flocks` assigns the equilibria of a closed mesh to the
  nearest smooth equilibrium;
* :func:`lattice_count`, :func:`expected_count_mc` and
  :func:`equidistribution_fraction` are the lattice/equidistribution
  experiments behind the averaging results;
* :func:`running_averages` accumulates Cesaro means of the flock counts over a
  range of grid resolutions.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .classify import EquilibriumSet, classify_patch, classify_polygon
from .discretize import discretize_curve, discretize_surface, window_positions
from .errors import DegenerateError, DiscretizationError, WindowError
from .geometry import (SADDLE, STABLE, UNSTABLE, ParametricCurve, ParametricSurface, SmoothEquilibrium,
                       curve_equilibrium_at, equilibrium_at)
from .indices import (ErrorBounds, ImaginaryIndices, error_bounds, imaginary_indices_2d,
                      imaginary_indices_3d, predicted_regions)
from .regions import ConvexPolygon, lattice_count, lattice_counts_many

log = logging.getLogger(__name__)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator; independent streams via SeedSequence."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("POLYEQ_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# Window counts
# ---------------------------------------------------------------------------


@dataclass
class WindowCounts:
    K: int
    center_index: tuple
    U: int
    N: int
    S: int
    boundary_safe: bool = True

    def as_tuple(self) -> tuple[int, int, int]:
        return self.U, self.N, self.S

    def to_dict(self) -> dict:
        return {"K": self.K, "center_index": [float(c) for c in self.center_index],
                "U": self.U, "N": self.N, "S": self.S, "boundary_safe": self.boundary_safe}


def _in_window(eqs: EquilibriumSet, center, K) -> list:
    grid = eqs.vertex_grid
    c = np.asarray(center, dtype=float)
    out = []
    for p in eqs.points:
        g = grid[list(p.cell_vertices)]
        if np.any(np.all(np.abs(g - c) <= K + 1e-9, axis=-1)):
            out.append(p)
    return out


def _check_window(eqs: EquilibriumSet, center, K):
    grid = eqs.vertex_grid
    if grid is None:
        raise WindowError("equilibrium set has no grid indices (not a grid patch)")
    c = np.asarray(center, dtype=float)
    lo, hi = grid.min(axis=0), grid.max(axis=0)
    # cells counted in the window may reach one step beyond it; all of their
    # vertices must be interior vertices of the grid
    if np.any(c - K - 1 <= lo) or np.any(c + K + 1 >= hi):
        raise WindowError(f"window of half width K={K} around {tuple(c)} touches the patch boundary "
                          f"(grid indices span {tuple(lo)}..{tuple(hi)})")


def window_counts(eqs: EquilibriumSet, center, K: int) -> WindowCounts:
    """Count equilibria whose carrier has a vertex with grid index within
    ``K`` of ``center`` (max-norm)."""
    if K < 0:
        raise WindowError("K must be non-negative")
    _check_window(eqs, center, K)
    pts = _in_window(eqs, center, K)
    if any(p.boundary for p in pts):
        raise WindowError("window contains boundary cells")
    U = sum(p.kind == UNSTABLE for p in pts)
    N = sum(p.kind == SADDLE for p in pts)
    S = sum(p.kind == STABLE for p in pts)
    return WindowCounts(int(K), tuple(float(x) for x in np.atleast_1d(center)), U, N, S, True)


def counts_2d(eqs: EquilibriumSet, center: float, K: int) -> tuple[int, int]:
    """``(U, S)`` of a polygon within ``K`` steps of grid index ``center``."""
    if eqs.dim != 2:
        raise WindowError("counts_2d needs a polygon census")
    _check_window(eqs, [center], K)
    pts = _in_window(eqs, [center], K)
    return sum(p.kind == UNSTABLE for p in pts), sum(p.kind == STABLE for p in pts)


def window_near_degenerate(eqs: EquilibriumSet, center, K) -> list:
    """Near-degenerate carriers inside the window (these are not counted)."""
    grid = eqs.vertex_grid
    c = np.asarray(center, dtype=float)
    out = []
    for carrier in eqs.near_degenerate:
        if carrier[0] == "vertex":
            vids = [carrier[1]]
        elif carrier[0] == "edge":
            vids = list(carrier[1:])
        else:
            continue
        if np.any(np.all(np.abs(grid[vids] - c) <= K + 1e-9, axis=-1)):
            out.append(carrier)
    return out


# ---------------------------------------------------------------------------
# Flock reports
# ---------------------------------------------------------------------------


@dataclass
class FlockReport:
    smooth_eq: SmoothEquilibrium
    counts: tuple                    # (U, N, S)
    predicted: Optional[ImaginaryIndices]
    errors_allowed: Optional[ErrorBounds]
    within_bounds: Optional[dict]
    flock_diameter: float
    members: list = field(default_factory=list)
    window: Optional[WindowCounts] = None
    ambiguous: int = 0
    near_degenerate: list = field(default_factory=list)

    @property
    def identity(self) -> int:
        U, N, S = self.counts
        return S + U - N

    def to_dict(self) -> dict:
        U, N, S = self.counts
        return {
            "smooth": self.smooth_eq.to_dict(),
            "counts": {"U": U, "N": N, "S": S},
            "identity": self.identity,
            "predicted": None if self.predicted is None else self.predicted.to_dict(),
            "error_bounds": None if self.errors_allowed is None else self.errors_allowed.to_dict(),
            "within_bounds": self.within_bounds,
            "flock_diameter": float(self.flock_diameter),
            "window": None if self.window is None else self.window.to_dict(),
            "ambiguous": self.ambiguous,
            "near_degenerate": [[c[0]] + [int(x) for x in c[1:]] for c in self.near_degenerate],
        }


def _within(counts, idx: ImaginaryIndices, eb: ErrorBounds) -> Optional[dict]:
    if not eb.mesh_ratio_ok:
        return None
    U, N, S = counts
    return {"U": bool(abs(U - idx.U_star) <= eb.err_U),
            "N": bool(abs(N - idx.N_star) <= eb.err_N),
            "S": bool(abs(S - idx.S_star) <= eb.err_S)}


def _diameter(points) -> float:
    if len(points) < 2:
        return 0.0
    x = np.array([p.location for p in points])
    d = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=-1)
    return float(d.max())


def _predict(eq: SmoothEquilibrium, lam: float):
    try:
        idx = imaginary_indices_3d(eq.rho, *eq.kappas)
        eb = error_bounds(eq.forms, eq.rho, lam) if eq.forms is not None else None
    except DegenerateError:
        return None, None
    return idx, eb


def saturating_K(eq: SmoothEquilibrium, lam: float, margin: int = 2) -> int:
    """Window half width that contains every predicted flock region."""
    R = predicted_regions(eq.forms, eq.rho, lam)
    polys = [R.vertex_ij, *R.faces_ij, *R.edges_ij.values()]
    ext = max((float(np.abs(p.vertices).max()) for p in polys if len(p.vertices)), default=0.0)
    return int(math.ceil(ext)) + margin


def flock_report_patch(surface: ParametricSurface, n: int, offset=(0.0, 0.0), K: Optional[int] = None,
                       center=(0.0, 0.0), origin=(0.0, 0.0, 0.0), n_v: Optional[int] = None,
                       tol: float = 1e-10, full_grid: bool = False) -> FlockReport:
    """Discretize around the smooth equilibrium at parameters ``center`` and
    compare the windowed counts with the imaginary indices.

    Only the window (plus a margin) is discretized unless ``full_grid``.
    ``K=None`` picks :func:`saturating_K`.
    """
    eq = equilibrium_at(surface, center[0], center[1], origin)
    n_v_ = n if n_v is None else n_v
    u1, u2, v1, v2 = surface.domain
    lam = ((v2 - v1) / n_v_) / ((u2 - u1) / n)
    if K is None:
        K = saturating_K(eq, lam)
    win = None if full_grid else window_positions(surface, n, offset, center, K, margin=2, n_v=n_v)
    patch = discretize_surface(surface, n, offset, origin, n_v=n_v, center=center, window=win)
    eqs = classify_patch(patch, origin, tol)
    c = (0.0, 0.0)  # grid indices are measured from the equilibrium
    wc = window_counts(eqs, c, K)
    members = _in_window(eqs, c, K)
    idx, eb = _predict(eq, lam)
    within = _within(wc.as_tuple(), idx, eb) if idx is not None and eb is not None else None
    return FlockReport(eq, wc.as_tuple(), idx, eb, within, _diameter(members), members, wc,
                       near_degenerate=window_near_degenerate(eqs, c, K))


def cluster_flocks(eqs: EquilibriumSet, smooth: Sequence[SmoothEquilibrium], lam: float = 1.0,
                   tol: float = 1e-9) -> list[FlockReport]:
    """Assign each discrete equilibrium to the nearest smooth equilibrium.

    Points whose two nearest smooth equilibria are equally far (within
    ``tol`` relative) are still assigned to the first but counted in
    ``ambiguous``.  Predictions use mesh ratio ``lam`` for the error bounds.
    """
    if len(smooth) == 0:
        raise WindowError("need at least one smooth equilibrium")
    centers = np.array([s.position for s in smooth])
    groups: list[list] = [[] for _ in smooth]
    amb = [0] * len(smooth)
    for p in eqs.counted():
        d = np.linalg.norm(centers - p.location, axis=1)
        order = np.argsort(d, kind="stable")
        k = int(order[0])
        if len(order) > 1 and d[order[1]] - d[k] <= tol * max(1.0, d[k]):
            amb[k] += 1
        groups[k].append(p)
    reports = []
    for s, pts, a in zip(smooth, groups, amb):
        counts = (sum(p.kind == UNSTABLE for p in pts), sum(p.kind == SADDLE for p in pts),
                  sum(p.kind == STABLE for p in pts))
        idx, eb = _predict(s, lam)
        within = _within(counts, idx, eb) if idx is not None and eb is not None else None
        reports.append(FlockReport(s, counts, idx, eb, within, _diameter(pts), pts, None, a))
    return reports


# ---------------------------------------------------------------------------
# 2D flocks
# ---------------------------------------------------------------------------


@dataclass
class CurveFlock:
    smooth_eq: SmoothEquilibrium
    U: int
    S: int
    U_star: float
    S_star: float
    K: int
    n: int
    offset: float

    @property
    def band_ok(self) -> bool:
        """Counts lie in ``{floor(x), floor(x) + 1}`` of the indices."""
        return (math.floor(self.U_star) <= self.U <= math.floor(self.U_star) + 1
                and math.floor(self.S_star) <= self.S <= math.floor(self.S_star) + 1)

    def to_dict(self) -> dict:
        return {"smooth": self.smooth_eq.to_dict(), "U": self.U, "S": self.S,
                "U_star": self.U_star, "S_star": self.S_star, "K": self.K, "n": self.n,
                "offset": self.offset, "band_ok": self.band_ok}


def curve_flock(curve: ParametricCurve, n: int, offset: float, t_eq: float, K: int,
                origin=(0.0, 0.0), tol: float = 1e-10) -> CurveFlock:
    """Counts of a polygon flock around the smooth equilibrium at ``t_eq``."""
    eq = curve_equilibrium_at(curve, t_eq, origin)
    U_star, S_star = imaginary_indices_2d(eq.rho, eq.kappas[0])
    poly = discretize_curve(curve, n, offset, center=t_eq)
    if curve.closed:
        # measure indices cyclically from the equilibrium
        half = n / 2.0
        poly.indices = (poly.indices + half) % n - half
    eqs = classify_polygon(poly, origin, tol)
    U, S = counts_2d(eqs, 0.0, K)
    return CurveFlock(eq, U, S, U_star, S_star, K, n, offset)


# ---------------------------------------------------------------------------
# Lattice experiments
# ---------------------------------------------------------------------------


def expected_count_mc(region, trials: int, seed: int = 0) -> tuple[float, float]:
    """Mean and standard error of the lattice count of ``x + region`` for
    ``x`` uniform in ``[0, 1)^2``."""
    if trials < 100:
        raise ValueError("need at least 100 trials")
    x = make_rng(seed).random((trials, 2))
    c = lattice_counts_many(region, x)
    return float(c.mean()), float(c.std(ddof=1) / math.sqrt(trials))


def looks_irrational(x: float, depth: int = 12, cap: float = 1e6) -> bool:
    """Heuristic: the continued fraction of ``x`` has ``depth`` partial
    quotients below ``cap`` (a rational with small denominator terminates)."""
    frac = x - math.floor(x)
    for _ in range(depth):
        if frac < 1.0 / cap:
            return False
        y = 1.0 / frac
        frac = y - math.floor(y)
    return True


def equidistribution_fraction(eta, region, n: int) -> float:
    """Fraction of ``k = 1..n`` with ``frac(k eta)`` in ``region``.

    ``eta`` is a scalar (``region`` an interval ``(lo, hi)``) or a pair
    (``region`` a :class:`ConvexPolygon`, a box ``(x0, x1, y0, y1)`` or a
    predicate on ``(n, 2)`` arrays).
    """
    k = np.arange(1, n + 1, dtype=np.float64)
    eta_arr = np.atleast_1d(np.asarray(eta, dtype=float))
    for e in list(eta_arr) + ([eta_arr[0] / eta_arr[1]] if len(eta_arr) == 2 else []):
        if not looks_irrational(float(e)):
            log.warning("eta component %r looks rational; equidistribution does not apply", e)
    if len(eta_arr) == 1:
        x = np.mod(k * eta_arr[0], 1.0)
        lo, hi = region
        return float(np.mean((x >= lo) & (x <= hi)))
    x = np.mod(k[:, None] * eta_arr[None, :], 1.0)
    if isinstance(region, ConvexPolygon):
        inside = region.contains(x, tol=0.0)
    elif callable(region):
        inside = np.asarray(region(x), dtype=bool)
    else:
        x0, x1, y0, y1 = region
        inside = (x[:, 0] >= x0) & (x[:, 0] <= x1) & (x[:, 1] >= y0) & (x[:, 1] <= y1)
    return float(np.mean(inside))


# ---------------------------------------------------------------------------
# Running averages
# ---------------------------------------------------------------------------


@dataclass
class AverageSeries:
    ks: NDArray
    U: NDArray
    N: NDArray
    S: NDArray
    targets: ImaginaryIndices
    offsets: tuple
    K: int

    @property
    def mean_U(self) -> NDArray:
        return np.cumsum(self.U) / np.arange(1, len(self.U) + 1)

    @property
    def mean_N(self) -> NDArray:
        return np.cumsum(self.N) / np.arange(1, len(self.N) + 1)

    @property
    def mean_S(self) -> NDArray:
        return np.cumsum(self.S) / np.arange(1, len(self.S) + 1)

    def final_means(self) -> tuple[float, float, float]:
        return float(self.mean_U[-1]), float(self.mean_N[-1]), float(self.mean_S[-1])

    def rows(self):
        mu, mn, ms = self.mean_U, self.mean_N, self.mean_S
        for t in range(len(self.ks)):
            yield (int(self.ks[t]), int(self.U[t]), int(self.N[t]), int(self.S[t]),
                   float(mu[t]), float(mn[t]), float(ms[t]))


def grid_offsets(surface: ParametricSurface, center=(0.0, 0.0)) -> tuple[float, float]:
    """``eta`` with ``frac(k eta)`` = fractional grid position of ``center``
    at resolution ``k`` (grids start at the domain corner)."""
    u1, u2, v1, v2 = surface.domain
    return ((center[0] - u1) / (u2 - u1), (center[1] - v1) / (v2 - v1))


def min_safe_resolution(surface: ParametricSurface, K: int, center=(0.0, 0.0), margin: int = 2) -> int:
    """Smallest ``k`` for which the ``K`` window (plus ``margin``) around
    ``center`` fits inside the grid in both directions."""
    eta = grid_offsets(surface, center)
    room = min(min(e, 1.0 - e) for e in eta)
    if room <= 0:
        raise WindowError("center lies on the domain boundary")
    return max(3, int(math.ceil((K + margin + 2) / room)))


def counts_for_k(surface: ParametricSurface, k: int, K: int, center=(0.0, 0.0), origin=(0.0, 0.0, 0.0),
                 tol: float = 1e-10) -> tuple[int, int, int]:
    """Windowed ``(U, N, S)`` at resolution ``k`` (zero grid offset)."""
    try:
        win = window_positions(surface, k, (0.0, 0.0), center, K, margin=2)
        patch = discretize_surface(surface, k, (0.0, 0.0), origin, center=center, window=win)
        eqs = classify_patch(patch, origin, tol)
        return window_counts(eqs, (0.0, 0.0), K).as_tuple()
    except Exception as exc:  # annotate with the failing resolution
        raise type(exc)(f"k={k}: {exc}") from exc


def running_averages(surface: ParametricSurface, origin, K: int, n_min: int, n_max: int,
                     center=(0.0, 0.0), workers: Optional[int] = None,
                     on_step: Optional[Callable] = None, done: Optional[dict] = None) -> AverageSeries:
    """Cesaro means of the flock counts for resolutions ``n_min..n_max``.

    ``done`` maps already computed ``k -> (U, N, S)`` (checkpoint resume);
    ``on_step(k, counts)`` is called in increasing ``k`` order for every
    newly computed resolution.
    """
    if not (3 <= n_min <= n_max):
        raise ValueError("need 3 <= n_min <= n_max")
    eq = equilibrium_at(surface, center[0], center[1], origin)
    targets = imaginary_indices_3d(eq.rho, *eq.kappas)
    eta = grid_offsets(surface, center)
    for e in eta:
        if not looks_irrational(e):
            log.warning("grid offset %r looks rational: averages need not converge to the indices", e)
    done = dict(done or {})
    ks = list(range(n_min, n_max + 1))
    todo = [k for k in ks if k not in done]
    workers = workers or thread_count()

    def job(k):
        return counts_for_k(surface, k, K, center, origin)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = ex.map(job, todo)
            for k, c in zip(todo, results):
                done[k] = c
                if on_step:
                    on_step(k, c)
    else:
        for k in todo:
            done[k] = job(k)
            if on_step:
                on_step(k, done[k])
    arr = np.array([done[k] for k in ks], dtype=np.int64).reshape(-1, 3)
    return AverageSeries(np.array(ks), arr[:, 0], arr[:, 1], arr[:, 2], targets, eta, K)


# ---------------------------------------------------------------------------
# Closed surfaces
# ---------------------------------------------------------------------------


def latitude_grid_samples(surface: ParametricSurface, n: int, n_v: Optional[int] = None,
                          offset=(0.0, 0.0)) -> tuple[NDArray, float]:
    """Shifted equidistant samples of a latitude/longitude chart.

    The chart must be periodic in ``u`` and collapse to the two poles at
    ``v = -pi/2`` and ``v = pi/2``.  Returns the points (grid samples plus
    both poles) and the mesh ratio ``lambda = dv / du``.
    """
    if not surface.periodic_u:
        raise WindowError("closed-surface sampling needs a chart periodic in u")
    n_v = max(n // 2, 3) if n_v is None else n_v
    if n < 3 or n_v < 3:
        raise DiscretizationError(f"n too small: need n >= 3, got {min(n, n_v)}")
    ou, ov = map(float, offset)
    if not (0.0 <= ou < 1.0 and 0.0 <= ov < 1.0):
        raise DiscretizationError(f"offsets must lie in [0, 1), got {offset}")
    u1, u2 = surface.domain[:2]
    du, dv = (u2 - u1) / n, math.pi / n_v
    u = u1 + (np.arange(n) + ou) * du
    v = -math.pi / 2 + (np.arange(n_v + 1) + ov) * dv
    v = v[(v > -math.pi / 2) & (v < math.pi / 2)]
    pts = surface(u[:, None], v[None, :]).reshape(-1, 3)
    poles = surface(np.array([0.0, 0.0]), np.array([-math.pi / 2, math.pi / 2])).reshape(-1, 3)
    return np.vstack([pts, poles]), dv / du


@dataclass
class ClosedSurfaceReport:
    flocks: list
    equilibria: EquilibriumSet
    hull: object
    lam: float
    n: int
    n_v: int
    offset: tuple

    @property
    def census(self) -> tuple[int, int, int]:
        return self.equilibria.counts

    def to_dict(self) -> dict:
        U, N, S = self.census
        return {"flocks": [f.to_dict() for f in self.flocks], "census": {"U": U, "N": N, "S": S},
                "poincare_hopf": S + U - N, "lambda": self.lam, "n": self.n, "n_v": self.n_v,
                "offset": [float(x) for x in self.offset],
                "near_degenerate": [[c[0]] + [int(x) for x in c[1:]] for c in self.equilibria.near_degenerate]}


def closed_surface_report(surface: ParametricSurface, n: int, n_v: Optional[int] = None, offset=(0.0, 0.0),
                          origin=(0.0, 0.0, 0.0), tol: float = 1e-10) -> ClosedSurfaceReport:
    """Census of the hull of a shifted latitude/longitude grid, with every
    discrete equilibrium assigned to its nearest smooth equilibrium."""
    from .discretize import hull_of_samples
    from .geometry import find_smooth_equilibria

    pts, lam = latitude_grid_samples(surface, n, n_v, offset)
    hull = hull_of_samples(pts)
    eqs = classify_patch(hull, origin, tol)
    smooth = [s for s in find_smooth_equilibria(surface, origin) if not s.degenerate]
    flocks = cluster_flocks(eqs, smooth, lam)
    nv = max(n // 2, 3) if n_v is None else n_v
    return ClosedSurfaceReport(flocks, eqs, hull, lam, n, nv, tuple(offset))
