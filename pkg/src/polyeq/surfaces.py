"""Built-in curves and surfaces with analytic derivative jets.

The registry understands short textual specs such as ``"ellipsoid 1.25 1.15 1"``,
``"ellipse 2 1"`` or ``"quadric-patch -1 0.3 -1 2"``; see :func:`from_spec`.
"""

from __future__ import annotations

import math
import shlex

import numpy as np

from .errors import GeometryError
from .geometry import ParametricCurve, ParametricSurface

# default tilt of the closed ellipsoid chart: keeps all six axis endpoints away
# from the singular poles of the latitude/longitude parametrization
DEFAULT_POLE = (1.0, 2.0, 3.0)


def _rotation_to(pole) -> np.ndarray:
    """Rotation matrix taking the z axis onto ``pole``."""
    z = np.asarray(pole, dtype=float)
    z = z / np.linalg.norm(z)
    helper = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    x = np.cross(helper, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


def _sphere_jet(u, v):
    cu, su, cv, sv = math.cos(u), math.sin(u), math.cos(v), math.sin(v)
    s = np.array([cv * cu, cv * su, sv])
    s_u = np.array([-cv * su, cv * cu, 0.0])
    s_v = np.array([-sv * cu, -sv * su, cv])
    s_uu = np.array([-cv * cu, -cv * su, 0.0])
    s_uv = np.array([sv * su, -sv * cu, 0.0])
    s_vv = -s
    return s, s_u, s_v, s_uu, s_uv, s_vv


def linear_sphere_image(A, domain, periodic_u=False, name="ellipsoid", params=None,
                        center=(0.0, 0.0, 0.0), u_shift=0.0, v_shift=0.0) -> ParametricSurface:
    """Surface ``center + A @ s(u + u_shift, v + v_shift)`` where ``s`` is the
    unit sphere in latitude/longitude coordinates."""
    A = np.asarray(A, dtype=float)
    c = np.asarray(center, dtype=float)

    def func(u, v):
        u = np.asarray(u, dtype=float) + u_shift
        v = np.asarray(v, dtype=float) + v_shift
        s = np.stack([np.cos(v) * np.cos(u), np.cos(v) * np.sin(u), np.sin(v)], axis=-1)
        return s @ A.T + c

    def derivs(u, v):
        out = [A @ x for x in _sphere_jet(u + u_shift, v + v_shift)]
        out[0] = out[0] + c
        return tuple(out)

    return ParametricSurface(func, domain, derivs, periodic_u=periodic_u, name=name,
                             params=dict(params or {}))


def ellipsoid(a: float, b: float, c: float, pole=DEFAULT_POLE) -> ParametricSurface:
    """Closed ellipsoid with semi-axes ``a, b, c`` along x, y, z.

    The latitude/longitude chart is taken about ``pole`` so that none of the
    axis endpoints (the equilibria for the centre) sits at a chart singularity.
    The latitude range stops just short of the poles.
    """
    if min(a, b, c) <= 0:
        raise GeometryError("ellipsoid semi-axes must be positive")
    A = np.diag([a, b, c]) @ _rotation_to(pole)
    eps = 1e-3
    dom = (-math.pi, math.pi, -math.pi / 2 + eps, math.pi / 2 - eps)
    return linear_sphere_image(A, dom, periodic_u=True, name="ellipsoid",
                               params={"a": a, "b": b, "c": c, "pole": list(map(float, pole))})


def ellipsoid_patch(a: float, b: float, c: float, half_u: float = 0.5, half_v: float = 0.5,
                    at: str = "y", domain=None) -> ParametricSurface:
    """Patch of the ellipsoid ``(a cos v cos u, b cos v sin u, c sin v)`` whose
    parameter origin sits on the endpoint of the chosen axis.

    ``at="y"`` is the middle-axis endpoint ``(0, b, 0)`` (a saddle when
    ``a > b > c``); there ``E=a^2, F=0, G=c^2, L=N=-b, M=0``.
    """
    if min(a, b, c) <= 0:
        raise GeometryError("ellipsoid semi-axes must be positive")
    shifts = {"x": (0.0, 0.0), "y": (math.pi / 2, 0.0), "-x": (math.pi, 0.0), "-y": (-math.pi / 2, 0.0)}
    if at not in shifts:
        raise GeometryError(f"unknown axis endpoint {at!r}")
    us, vs = shifts[at]
    dom = domain if domain is not None else (-half_u, half_u, -half_v, half_v)
    return linear_sphere_image(np.diag([a, b, c]), dom, name="ellipsoid-patch",
                               params={"a": a, "b": b, "c": c, "at": at}, u_shift=us, v_shift=vs)


def sphere(R: float = 1.0) -> ParametricSurface:
    s = ellipsoid(R, R, R, pole=(0.0, 0.0, 1.0))
    s.name, s.params = "sphere", {"R": R}
    return s


def plane(height: float = 1.0, half: float = 1.0) -> ParametricSurface:
    def func(u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        return np.stack([u, v, np.full_like(u, height)], axis=-1)

    def derivs(u, v):
        z = np.zeros(3)
        return np.array([u, v, height]), np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), z, z, z

    return ParametricSurface(func, (-half, half, -half, half), derivs, name="plane",
                             params={"height": height})


def quadric_patch(L: float, M: float, N: float, rho: float, E: float = 1.0, F: float = 0.0,
                  G: float = 1.0, domain=(-0.5, 0.5, -0.5, 0.5)) -> ParametricSurface:
    """Exact quadric with prescribed fundamental forms at its apex.

    ``r(u,v) = (A u + B v, C u + D v, rho + (L u^2 + 2 M u v + N v^2)/2)`` with
    the 2x2 block chosen so that the first form at ``(0,0)`` is ``(E, F, G)``.
    The apex ``(0, 0, rho)`` is an equilibrium for the origin.
    """
    if not (E > 0 and G > 0 and E * G - F * F > 0):
        raise GeometryError("first fundamental form must be positive definite")
    if rho <= 0:
        raise GeometryError("rho must be positive")
    A = math.sqrt(E)
    B = F / A
    D = math.sqrt(G - B * B)

    def func(u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        z = rho + 0.5 * (L * u * u + 2 * M * u * v + N * v * v)
        return np.stack([A * u + B * v, D * v, z], axis=-1)

    def derivs(u, v):
        r = np.array([A * u + B * v, D * v, rho + 0.5 * (L * u * u + 2 * M * u * v + N * v * v)])
        return (r, np.array([A, 0.0, L * u + M * v]), np.array([B, D, M * u + N * v]),
                np.array([0.0, 0.0, L]), np.array([0.0, 0.0, M]), np.array([0.0, 0.0, N]))

    return ParametricSurface(func, domain, derivs, name="quadric-patch",
                             params={"L": L, "M": M, "N": N, "rho": rho, "E": E, "F": F, "G": G})


def bumpy_ellipsoid(a: float, b: float, c: float, amplitude: float = 0.02, pole=DEFAULT_POLE,
                    seed: int = 0) -> ParametricSurface:
    """Ellipsoid with a small smooth radial perturbation (numeric jets).

    ``r = e(u,v) * (1 + amplitude * f(d))`` where ``d`` is the unit direction
    of the unperturbed point and ``f`` a fixed random combination of
    low-order spherical polynomials.
    """
    rng = np.random.default_rng(seed)
    coeffs = rng.normal(size=(3, 3))
    coeffs = 0.5 * (coeffs + coeffs.T)
    lin = rng.normal(size=3)
    base = ellipsoid(a, b, c, pole)

    def func(u, v):
        p = base(u, v)
        d = p / np.linalg.norm(p, axis=-1, keepdims=True)
        f = np.einsum("...i,ij,...j->...", d, coeffs, d) + d @ lin
        return p * (1 + amplitude * f)[..., None]

    return ParametricSurface(func, base.domain, None, periodic_u=True, name="bumpy-ellipsoid",
                             params={"a": a, "b": b, "c": c, "amplitude": amplitude, "seed": seed})


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------


def ellipse(a: float, b: float, t_shift: float = 0.0) -> ParametricCurve:
    """Closed ellipse ``(a cos t, b sin t)``, t in [t_shift, t_shift + 2 pi]."""
    if min(a, b) <= 0:
        raise GeometryError("ellipse semi-axes must be positive")

    def func(t):
        t = np.asarray(t, dtype=float)
        return np.stack([a * np.cos(t), b * np.sin(t)], axis=-1)

    def derivs(t):
        c, s = math.cos(t), math.sin(t)
        return (np.array([a * c, b * s]), np.array([-a * s, b * c]),
                np.array([-a * c, -b * s]), np.array([a * s, -b * c]))

    return ParametricCurve(func, (t_shift, t_shift + 2 * math.pi), derivs, closed=True, name="ellipse")


def circle(R: float = 1.0) -> ParametricCurve:
    cur = ellipse(R, R)
    cur.name = "circle"
    return cur


def parabola_arc(kappa: float, rho: float, half: float = 0.5) -> ParametricCurve:
    """Open arc ``(t, rho + kappa t^2 / 2)``: curvature ``kappa`` at its apex."""

    def func(t):
        t = np.asarray(t, dtype=float)
        return np.stack([t, rho + 0.5 * kappa * t * t], axis=-1)

    def derivs(t):
        return (np.array([t, rho + 0.5 * kappa * t * t]), np.array([1.0, kappa * t]),
                np.array([0.0, kappa]), np.zeros(2))

    return ParametricCurve(func, (-half, half), derivs, closed=False, name="parabola")


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

_SURFACES = {
    "ellipsoid": (ellipsoid, 3),
    "ellipsoid-patch": (ellipsoid_patch, 3),
    "sphere": (sphere, 1),
    "quadric-patch": (quadric_patch, 4),
    "bumpy-ellipsoid": (bumpy_ellipsoid, 3),
}
_CURVES = {
    "ellipse": (ellipse, 2),
    "circle": (circle, 1),
    "parabola": (parabola_arc, 2),
}


def _parse(spec: str, table):
    parts = shlex.split(spec)
    if not parts:
        raise GeometryError("empty surface/curve spec")
    name, args = parts[0].lower(), parts[1:]
    if name not in table:
        raise GeometryError(f"unknown name {name!r}; known: {', '.join(sorted(table))}")
    factory, nmin = table[name]
    try:
        values = [float(x) for x in args]
    except ValueError as exc:
        raise GeometryError(f"non-numeric parameter in {spec!r}") from exc
    if len(values) < nmin:
        raise GeometryError(f"{name} needs at least {nmin} parameters, got {len(values)}")
    return name, factory, values


def surface_from_spec(spec: str) -> ParametricSurface:
    """Build a registry surface.

    ``quadric-patch L M N rho [E F G [half [su sv]]]`` accepts an optional
    first form, the half side length of the square parameter domain and a
    shift ``(su, sv)`` of that domain (the apex stays at parameters (0, 0)).
    """
    name, factory, vals = _parse(spec, _SURFACES)
    if name == "quadric-patch":
        L, M, N, rho = vals[:4]
        E, F, G = vals[4:7] if len(vals) >= 7 else (1.0, 0.0, 1.0)
        half = vals[7] if len(vals) >= 8 else 0.5
        su, sv = vals[8:10] if len(vals) >= 10 else (0.0, 0.0)
        return quadric_patch(L, M, N, rho, E, F, G, domain=(su - half, su + half, sv - half, sv + half))
    if name == "ellipsoid-patch":
        return ellipsoid_patch(*vals[:5])
    if name == "bumpy-ellipsoid":
        a, b, c = vals[:3]
        amp = vals[3] if len(vals) > 3 else 0.02
        seed = int(vals[4]) if len(vals) > 4 else 0
        return bumpy_ellipsoid(a, b, c, amp, seed=seed)
    return factory(*vals)


def curve_from_spec(spec: str) -> ParametricCurve:
    name, factory, vals = _parse(spec, _CURVES)
    return factory(*vals)
