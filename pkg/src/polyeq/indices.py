"""Imaginary equilibrium indices, explicit error bounds and the predicted
lattice regions of equilibrium flocks.

Everything here is a closed-form function of the local data at a smooth
equilibrium ``m``: the distance ``rho = |m - o|``, the principal curvatures
(or the fundamental forms ``E, F, G, L, M, N``) and the mesh ratio
``lam = Delta_v / Delta_u`` of the parameter grid.

Region conventions
------------------
Grid indices ``(i, j)`` are measured from the smooth equilibrium in units of
the grid steps, i.e. vertex ``p_ij`` sits at parameters ``(i du, j lam du)``.
For each cell family (vertex, face triangle, horizontal/vertical/diagonal
edge) the cells anchored at ``p_ij`` that carry an equilibrium are, to leading
order in the step size, exactly those whose anchor lies in a convex polygon of
the ``(i, j)`` plane.  The polygon areas are the expected counts; a random
grid offset turns them into lattice-point counts of translated polygons.
Anchors: an edge ``[p_ij, p_i+1,j]`` / ``[p_ij, p_i,j+1]`` / ``[p_ij,
p_i+1,j+1]`` / ``[p_i+1,j, p_i,j+1]`` and both triangles of the quad with
lower-left corner ``p_ij`` are anchored at ``p_ij``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateError, PolyeqError
from .geometry import DEGENERATE, SADDLE, FundamentalForms, classify_smooth, curvature_invariants, degeneracy_tol
from .regions import ConvexPolygon


class InconsistentIndicesError(PolyeqError):
    """S* + U* - N* is not within tolerance of +-1."""


@dataclass(frozen=True)
class ImaginaryIndices:
    """Expected numbers of stable, unstable and saddle points in a flock."""

    S_star: float
    U_star: float
    N_star: float
    d: float
    kind: str

    @property
    def identity(self) -> float:
        return self.S_star + self.U_star - self.N_star

    def as_tuple(self) -> tuple[float, float, float]:
        return self.S_star, self.U_star, self.N_star

    def to_dict(self) -> dict:
        return {"S_star": self.S_star, "U_star": self.U_star, "N_star": self.N_star,
                "d": self.d, "kind": self.kind, "identity": self.identity}


def _check_generic(rho, kappas):
    if not rho > 0:
        raise DegenerateError("rho must be positive")
    for k in kappas:
        if abs(rho * k + 1) <= degeneracy_tol(rho, k):
            raise DegenerateError(f"degenerate equilibrium: rho*kappa + 1 = {rho * k + 1:.3g}")


def imaginary_indices_3d(rho: float, k1: float, k2: float) -> ImaginaryIndices:
    """``d = 1/|(k1 rho + 1)(k2 rho + 1)|``, ``S* = d``, ``U* = k1 k2 rho^2 d``,
    ``N* = -(k1 + k2) rho d``."""
    _check_generic(rho, (k1, k2))
    d = 1.0 / abs((k1 * rho + 1) * (k2 * rho + 1))
    kind = classify_smooth(rho, k1, k2)
    return ImaginaryIndices(S_star=d, U_star=k1 * k2 * rho**2 * d,
                            N_star=-(k1 + k2) * rho * d, d=d, kind=kind)


def imaginary_indices_from_forms(f: FundamentalForms, rho: float) -> ImaginaryIndices:
    gauss, mean_sum = curvature_invariants(f)
    disc = max(mean_sum**2 - 4 * gauss, 0.0)
    k1 = (mean_sum - math.sqrt(disc)) / 2
    k2 = (mean_sum + math.sqrt(disc)) / 2
    return imaginary_indices_3d(rho, k1, k2)


def imaginary_indices_2d(rho: float, kappa: float) -> tuple[float, float]:
    """Return ``(U*, S*) = (|rho kappa| / |rho kappa + 1|, 1 / |rho kappa + 1|)``."""
    _check_generic(rho, (kappa,))
    denom = abs(rho * kappa + 1)
    return abs(rho * kappa) / denom, 1.0 / denom


def flock_identity(idx, tol: float = 1e-9) -> int:
    """Round ``S* + U* - N*`` to the nearest of -1, +1.

    ``idx`` is an :class:`ImaginaryIndices` or a triple ``(S*, U*, N*)``.
    Raises :class:`InconsistentIndicesError` when the residue exceeds ``tol``.
    """
    if isinstance(idx, ImaginaryIndices):
        value = idx.identity
    else:
        s, u, n = idx
        value = s + u - n
    target = 1 if value >= 0 else -1
    if abs(value - target) > tol:
        raise InconsistentIndicesError(f"S*+U*-N* = {value:.6g} is not within {tol:g} of +-1")
    return target


def smooth_identity(kind: str) -> int:
    if kind == DEGENERATE:
        raise DegenerateError("no identity for a degenerate equilibrium")
    return -1 if kind == SADDLE else 1


# ---------------------------------------------------------------------------
# Error bounds
# ---------------------------------------------------------------------------


def mesh_ratio_condition(f: FundamentalForms, lam: float) -> bool:
    """``lam |M| <= |L|`` and ``lam |M| <= lam^2 |N|``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return lam * abs(f.M) <= abs(f.L) and lam * abs(f.M) <= lam**2 * abs(f.N)


@dataclass
class ErrorBounds:
    err_U: float
    err_S: float
    err_N: float
    Vs: tuple
    Ws: tuple
    mesh_ratio_ok: bool

    def to_dict(self) -> dict:
        return {"err_U": self.err_U, "err_S": self.err_S, "err_N": self.err_N,
                "mesh_ratio_ok": self.mesh_ratio_ok}


def vw_table(f: FundamentalForms, rho: float, lam: float) -> tuple[list, list]:
    """The twelve pairs ``(V_s, W_s)``, s = 1..12 (0-based lists)."""
    E, F, G, L, M, N = f.E, f.F, f.G, f.L, f.M, f.N
    D0 = E * G - F * F
    r, l = rho, lam
    aM, aL, aN = abs(M), abs(L), abs(N)
    V = [0.0] * 12
    W = [0.0] * 12
    V[0] = l * r * L * (G + r * N)
    W[0] = l**2 * r * N * (F + r * M)
    V[1] = r * L * (F + r * M)
    W[1] = l * r * N * (E + r * L)
    V[2] = l**2 * r * (N * F - M * G)
    W[2] = l * (D0 - r * (M * F - L * G))
    V[3] = l * (D0 - r * (M * F - N * E))
    W[3] = r * (L * F - M * E)
    V[4] = l * (r * (N * E - M * F) + D0)
    W[4] = l * r**2 * (l * aN - aM) * (M * E - L * F)
    V[5] = F + r * M
    W[5] = r * (l * aN - aM) * (E + r * L)
    V[6] = l**2 * r * (N * F - M * G)
    W[6] = l * r * (aL - l * aM) * (r * (L * G - M * F) + D0)
    V[7] = l * (G + r * N)
    W[7] = r * (aL - l * aM) * (F + r * M)
    V[8], V[9], V[10], V[11] = V[4], V[5], V[6], V[7]
    W[8] = l * r**2 * aM * (M * E - L * F)
    W[9] = r * aM * (E + r * L)
    W[10] = l**2 * aM * (r * (L * G - M * F) + D0)
    W[11] = r * l * aM * (F + r * M)
    return V, W


def _spread(v, w):
    return max(abs(v), abs(w), abs(v - w), abs(v + w))


def error_bounds(f: FundamentalForms, rho: float, lam: float) -> ErrorBounds:
    """Explicit bounds ``Err_U, Err_S, Err_N`` on the flock count deviations."""
    D0 = f.det_first
    if not D0 > 0:
        raise DegenerateError("first fundamental form is not positive definite")
    gauss, mean_sum = curvature_invariants(f)
    prod = 1 + rho * mean_sum + rho**2 * gauss  # (k1 rho + 1)(k2 rho + 1)
    if abs(prod) <= 1e-12 * max(1.0, abs(rho * mean_sum), abs(rho**2 * gauss)):
        raise DegenerateError("degenerate equilibrium: (k1 rho + 1)(k2 rho + 1) = 0")
    V, W = vw_table(f, rho, lam)
    denom = lam * D0 * abs(prod)
    spread = [_spread(v, w) for v, w in zip(V, W)]
    return ErrorBounds(
        err_U=2 + sum(spread[0:2]) / denom,
        err_S=4 + 2 * sum(spread[2:4]) / denom,
        err_N=6 + sum(spread[4:12]) / denom,
        Vs=tuple(V), Ws=tuple(W), mesh_ratio_ok=mesh_ratio_condition(f, lam),
    )


# ---------------------------------------------------------------------------
# Predicted regions
# ---------------------------------------------------------------------------


@dataclass
class RegionSet:
    """Leading-order equilibrium regions of one flock.

    ``*_ij`` polygons live in the grid-index plane (anchor coordinates); their
    areas are the expected counts.  ``hexagon_P`` and ``triangles`` are the
    same vertex/face regions in the affine ``(X, Y)`` coordinates, with
    ``transforms[family] = (T, t)`` mapping ``(i, j) -> T (i, j) + t``.
    """

    hexagon_P: ConvexPolygon
    triangles: tuple
    vertex_ij: ConvexPolygon
    faces_ij: tuple
    edges_ij: dict
    transforms: dict
    fundamental_area: dict
    diagonal: str
    lower_bound_only: bool = False
    halfplanes: dict = field(default_factory=dict)

    @property
    def expected_U(self) -> float:
        return self.vertex_ij.area

    @property
    def expected_S(self) -> float:
        return sum(p.area for p in self.faces_ij)

    @property
    def expected_N(self) -> float:
        return sum(p.area for p in self.edges_ij.values())

    def to_dict(self) -> dict:
        return {
            "diagonal": self.diagonal,
            "lower_bound_only": self.lower_bound_only,
            "hexagon_P": self.hexagon_P.to_list(),
            "triangles": [t.to_list() for t in self.triangles],
            "vertex_ij": self.vertex_ij.to_list(),
            "faces_ij": [p.to_list() for p in self.faces_ij],
            "edges_ij": {k: p.to_list() for k, p in self.edges_ij.items()},
            "fundamental_area": dict(self.fundamental_area),
        }


def _compose(T, t, rows_xy):
    """Pull back ``a X + b Y + c > 0`` through ``(X, Y) = T (i, j) + t``."""
    out = []
    for a, b, c in rows_xy:
        ci = a * T[0, 0] + b * T[1, 0]
        cj = a * T[0, 1] + b * T[1, 1]
        out.append((ci, cj, a * t[0] + b * t[1] + c))
    return out


def vertex_halfplanes(f: FundamentalForms, rho: float, lam: float, diagonal: str):
    """Hexagon constraints in (X, Y) and the vertex transform."""
    E, F, G, L, M, N = f.E, f.F, f.G, f.L, f.M, f.N
    T = np.array([[E + rho * L, lam * (F + rho * M)],
                  [lam * (F + rho * M), lam**2 * (G + rho * N)]])
    t = np.zeros(2)
    hL, hN = 0.5 * rho * L, 0.5 * lam**2 * rho * N
    rows = [(-1, 0, -hL), (1, 0, -hL), (0, -1, -hN), (0, 1, -hN)]
    if diagonal == "E+":
        b = hN + lam * rho * M + hL
        rows += [(-1, -1, -b), (1, 1, -b)]
    else:
        b = hN - lam * rho * M + hL
        rows += [(1, -1, -b), (-1, 1, -b)]
    return T, t, rows


def face_halfplanes(f: FundamentalForms, rho: float, lam: float, diagonal: str):
    """Constraints of the two triangles ``T1``, ``T2`` in (X, Y) and the face
    transform.  For ``diagonal='E+'`` the triangles are ``[p00,p10,p11]`` and
    ``[p11,p01,p00]``; for ``'-'`` they are ``[p00,p10,p01]`` and
    ``[p10,p11,p01]``."""
    E, F, G, L, M, N = f.E, f.F, f.G, f.L, f.M, f.N
    D0 = E * G - F * F
    r, l = rho, lam
    T = np.array([[l * r * (L * F - M * E), l**2 * (r * (M * F - N * E) - D0)],
                  [l**2 * (r * (L * G - M * F) + D0), l**3 * r * (M * G - N * F)]])
    t = np.array([0.5 * l * r * L * F - 0.5 * l**2 * r * N * E,
                  0.5 * l**2 * r * L * G - 0.5 * l**3 * r * N * F])
    if diagonal == "E+":
        t1 = [(1, 0, -l * r * M * E), (0, 1, -(l**2 * r * M * F - l**2 * D0)),
              (-1, -1, l * r * M * E + l**2 * r * M * F)]
        t2 = [(-1, 0, l**2 * D0 - l**2 * r * M * F), (0, -1, -l**3 * r * M * G),
              (1, 1, l**2 * r * M * F + l**3 * r * M * G)]
    else:
        t1 = [(1, 0, 0.0), (0, -1, 0.0), (-1, 1, l**2 * D0)]
        t2 = [(-1, 0, l**2 * D0 + l * r * M * E - l**2 * r * M * F),
              (0, 1, -(l**2 * r * M * F - l**3 * r * M * G - l**2 * D0)),
              (1, -1, -l * r * M * E + 2 * l**2 * r * M * F - l**3 * r * M * G - l**2 * D0)]
    return T, t, t1, t2


def edge_halfplanes(f: FundamentalForms, rho: float, lam: float, diagonal: str) -> dict:
    """Leading-order saddle conditions ``ci i + cj j + c0 > 0`` per edge family.

    Rows 0, 1: the perpendicular foot lies inside the edge; rows 2, 3: the two
    opposite vertices lie below the supporting plane.  The opposite vertices
    are ``p_i,j-1, p_i+1,j+1`` (h), ``p_i+1,j+1, p_i-1,j`` (v) for
    ``diagonal='E+'`` and ``p_i,j+1, p_i+1,j-1`` (h), ``p_i+1,j, p_i-1,j+1`` (v)
    for ``'-'``; a diagonal edge has the two remaining quad corners.
    """
    E, F, G, L, M, N = f.E, f.F, f.G, f.L, f.M, f.N
    D0 = E * G - F * F
    r, l = rho, lam
    h = 0.5
    out = {}

    # horizontal [p_ij, p_i+1,j]
    ai, aj = -(E + r * L), -l * (F + r * M)
    rows = [(ai, aj, -h * r * L), (-ai, -aj, h * r * L + E)]
    bi, bj = r * (L * F - M * E), l * (r * (M * F - N * E) - D0)
    if diagonal == "E+":
        rows += [(-bi, -bj, -h * r * (L * F + l * N * E)),
                 (bi, bj, h * r * (L * F - 2 * M * E - l * N * E))]
    else:
        rows += [(bi, bj, h * r * (L * F - l * N * E)),
                 (-bi, -bj, -h * r * (L * F - 2 * M * E + l * N * E))]
    out["h"] = rows

    # vertical [p_ij, p_i,j+1]
    ai, aj = -(F + r * M), -l * (G + r * N)
    rows = [(ai, aj, -h * l * r * N), (-ai, -aj, h * l * r * N + l * G)]
    bi, bj = r * (L * G - M * F) + D0, l * r * (M * G - N * F)
    if diagonal == "E+":
        rows += [(-bi, -bj, -h * r * (L * G + 2 * l * M * G - l * N * F)),
                 (bi, bj, -h * r * (L * G + l * N * F))]
    else:
        rows += [(-bi, -bj, -h * r * (L * G - l * N * F)),
                 (bi, bj, -h * r * (L * G - 2 * l * M * G + l * N * F))]
    out["v"] = rows

    if diagonal == "E+":
        # [p_ij, p_i+1,j+1]
        ai = -(E + r * L + l * (F + r * M))
        aj = -l * (F + r * M + l * (G + r * N))
        q = r * (L + 2 * l * M + l**2 * N)
        rows = [(ai, aj, -h * q), (-ai, -aj, h * q + (E + 2 * l * F + l**2 * G))]
        bi = l * r * L * G + r * L * F - l * r * M * F - r * M * E + l * D0
        bj = l * (l * r * M * G + r * M * F - l * r * N * F - r * N * E - D0)
        rows += [(-bi, -bj, -h * r * (l * L * G + L * F - 2 * l * M * F - 2 * M * E - l**2 * N * F - l * N * E)),
                 (bi, bj, h * r * (l * L * G + L * F + 2 * l**2 * M * G + 2 * l * M * F - l**2 * N * F - l * N * E))]
    else:
        # [p_i+1,j, p_i,j+1]
        ai = r * L - l * r * M - l * F + E
        aj = l * (r * M - l * r * N - l * G + F)
        rows = [(ai, aj, h * (r * L - l**2 * r * N - 2 * l * F + 2 * E)),
                (-ai, -aj, -h * (r * L - l**2 * r * N - 2 * l**2 * G + 2 * l * F))]
        bi = l * r * L * G - r * L * F - l * r * M * F + r * M * E + l * D0
        bj = l * (l * r * M * G - r * M * F - l * r * N * F + r * N * E + D0)
        c2 = h * (l * r * L * G - r * L * F - l**2 * r * N * F + l * r * N * E + 2 * l * D0)
        c3 = -h * (l * r * L * G - r * L * F + 2 * l**2 * r * M * G - 4 * l * r * M * F + 2 * r * M * E
                   - l**2 * r * N * F + l * r * N * E + 2 * l * D0)
        rows += [(bi, bj, c2), (-bi, -bj, c3)]
    out["d"] = rows
    return out


def predicted_regions(f: FundamentalForms, rho: float, lam: float, diagonal: str | None = None) -> RegionSet:
    """Leading-order flock regions for the fundamental forms ``f`` at distance
    ``rho`` and mesh ratio ``lam``.

    ``diagonal`` defaults to ``'E+'`` for ``M >= 0`` and ``'E-'`` for ``M < 0``
    (the diagonal the triangulation rule picks near the equilibrium).
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if diagonal is None:
        diagonal = "E+" if f.M >= 0 else "E-"
    if diagonal not in ("E+", "E-"):
        raise ValueError("diagonal must be 'E+' or 'E-'")
    gauss, mean_sum = curvature_invariants(f)
    prod = 1 + rho * mean_sum + rho**2 * gauss
    if abs(prod) <= 1e-12 * max(1.0, abs(rho * mean_sum), abs(rho**2 * gauss)):
        raise DegenerateError("degenerate transforms: (k1 rho + 1)(k2 rho + 1) = 0")

    Tv, tv, hex_rows = vertex_halfplanes(f, rho, lam, diagonal)
    Tf, tf, t1_rows, t2_rows = face_halfplanes(f, rho, lam, diagonal)
    hexagon = ConvexPolygon.from_halfplanes(hex_rows)
    tri1 = ConvexPolygon.from_halfplanes(t1_rows)
    tri2 = ConvexPolygon.from_halfplanes(t2_rows)

    vertex_ij = ConvexPolygon.from_halfplanes(_compose(Tv, tv, hex_rows))
    faces_ij = (ConvexPolygon.from_halfplanes(_compose(Tf, tf, t1_rows)),
                ConvexPolygon.from_halfplanes(_compose(Tf, tf, t2_rows)))
    edge_rows = edge_halfplanes(f, rho, lam, diagonal)
    edges_ij = {k: ConvexPolygon.from_halfplanes(v) for k, v in edge_rows.items()}

    return RegionSet(
        hexagon_P=hexagon, triangles=(tri1, tri2), vertex_ij=vertex_ij, faces_ij=faces_ij,
        edges_ij=edges_ij, transforms={"vertex": (Tv, tv), "face": (Tf, tf)},
        fundamental_area={"vertex": abs(float(np.linalg.det(Tv))), "face": abs(float(np.linalg.det(Tf)))},
        diagonal=diagonal, lower_bound_only=not mesh_ratio_condition(f, lam),
        halfplanes={"vertex": _compose(Tv, tv, hex_rows), "T1": _compose(Tf, tf, t1_rows),
                    "T2": _compose(Tf, tf, t2_rows), **edge_rows},
    )
