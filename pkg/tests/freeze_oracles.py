"""Regenerate ``tests/data/frozen_oracles.json`` from the independent oracles.

Run ``python3 tests/freeze_oracles.py``.  Surfaces are evaluated here from
their closed-form parametrizations; no package code is used.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from oracles import (ellipse_perimeter, ellipsoid_axis_curvatures, exact_diagonal, exact_equilibria,
                     grid_patch_cells, indices_from_curvatures, lattice_count_exhaustive, polygon_equilibria)

OUT = Path(__file__).parent / "data" / "frozen_oracles.json"

# (L, M, N, rho, E, F, G, n, offset_u, offset_v)
PATCHES = [
    (-1.0, 0.0, -1.0, 0.5, 1.0, 0.0, 1.0, 12, 0.0, 0.0),
    (-1.0, 0.3, -0.7, 0.8, 1.1, 0.1, 0.9, 10, 0.37, 0.61),
    (-1.2, -0.4, -0.9, 1.3, 1.0, -0.2, 1.4, 14, 0.83, 0.29),
    (-0.6, 0.1, -1.5, 2.0, 0.8, 0.05, 1.2, 16, 0.11, 0.47),
]


def quadric_grid(L, M, N, rho, E, F, G, n, ou, ov, half=0.5):
    A = math.sqrt(E)
    B = F / A
    D = math.sqrt(G - B * B)
    step = 2 * half / n
    u = -half + (np.arange(n + 1) + ou) * step
    v = -half + (np.arange(n + 1) + ov) * step
    u = u[u <= half + 1e-12 * step]
    v = v[v <= half + 1e-12 * step]
    U, V = np.meshgrid(u, v, indexing="ij")
    z = rho + 0.5 * (L * U * U + 2 * M * U * V + N * V * V)
    return np.stack([A * U + B * V, D * V, z], axis=-1)


def patch_census(params):
    verts = quadric_grid(*params)
    na, nb = verts.shape[:2]
    dg = np.array([[exact_diagonal(verts[a, b], verts[a + 1, b], verts[a + 1, b + 1], verts[a, b + 1],
                                   (0, 0, 0)) for b in range(nb - 1)] for a in range(na - 1)])
    polys, border = grid_patch_cells(verts, dg)
    found, ties = exact_equilibria(verts.reshape(-1, 3), polys, (0, 0, 0), border)
    cnt = {k: sum(1 for f in found if f[0] == k) for k in "UNS"}
    return {"params": list(params), "U": cnt["U"], "N": cnt["N"], "S": cnt["S"], "ties": len(ties),
            "diag_plus": int((dg > 0).sum()), "diag_minus": int((dg < 0).sum()),
            "diag_zero": int((dg == 0).sum())}


def ellipse_polygon(a, b, n, off):
    t = 2 * np.pi * (np.arange(n) + off) / n
    return np.column_stack([a * np.cos(t), b * np.sin(t)])


def main():
    out = {}
    out["ellipse_perimeter_2_1"] = ellipse_perimeter(2.0, 1.0)
    k1, k2 = ellipsoid_axis_curvatures(1.25, 1.15, 1.0, 1)
    S, U, N = indices_from_curvatures(1.15, k1, k2)
    out["ellipsoid_saddle"] = {"kappas": [k1, k2], "S_star": S, "U_star": U, "N_star": N}
    out["patches"] = [patch_census(p) for p in PATCHES]
    polys = []
    for n, off in [(1000, 0.3), (500, 0.123), (2000, 0.777)]:
        U_, S_, ties = polygon_equilibria(ellipse_polygon(2.0, 1.0, n, off), (0, 0))
        polys.append({"n": n, "offset": off, "U": U_, "S": S_, "ties": ties})
    out["ellipse_polygons"] = polys
    hexagon = [(1, 0), (1.5, 1), (0.5, 2), (-1, 1.5), (-1.5, 0.2), (-0.5, -1)]
    trans = [(0.0, 0.0), (0.25, 0.75), (0.5, 0.5), (0.9, 0.1), (0.333, 0.667)]
    out["hexagon_lattice"] = {"vertices": hexagon, "translations": trans,
                              "counts": [lattice_count_exhaustive(hexagon, t) for t in trans]}
    OUT.parent.mkdir(exist_ok=True)
    OUT.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(json.dumps(out, indent=1)[:1500])


if __name__ == "__main__":
    main()
