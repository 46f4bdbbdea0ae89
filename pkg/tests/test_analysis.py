import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from conftest import random_forms
from polyeq.analysis import (closed_surface_report, counts_2d, counts_for_k, curve_flock, equidistribution_fraction,
                             expected_count_mc, flock_report_patch, grid_offsets, looks_irrational,
                             min_safe_resolution, running_averages, saturating_K, window_counts)
from polyeq.classify import classify_patch, classify_polygon
from polyeq.discretize import discretize_curve, discretize_surface, window_positions
from polyeq.errors import DegenerateError, WindowError
from polyeq.geometry import SADDLE, STABLE, UNSTABLE, equilibrium_at
from polyeq.indices import imaginary_indices_from_forms, predicted_regions
from polyeq.regions import ConvexPolygon, Disk, lattice_points
from polyeq.surfaces import circle, ellipse, ellipsoid, parabola_arc, quadric_patch

GOLDEN = (math.sqrt(5) - 1) / 2


# ---- window counts ---------------------------------------------------------

@pytest.fixture(scope="module")
def apex_patch():
    return classify_patch(discretize_surface(quadric_patch(-1.0, 0.0, -1.0, 0.5), 200, (0.31, 0.77)))


def test_window_counts_monotone_and_saturating(apex_patch):
    seq = [window_counts(apex_patch, (0.0, 0.0), K).as_tuple() for K in range(0, 30)]
    for a, b in zip(seq, seq[1:]):
        assert all(x <= y for x, y in zip(a, b))
    assert len(set(seq[10:])) == 1


def test_k0_at_vertex_equilibrium():
    eqs = classify_patch(discretize_surface(quadric_patch(-1.0, 0.0, -1.0, 0.5), 200))
    wc = window_counts(eqs, (0.0, 0.0), 0)
    assert wc.U == 1
    # everything else in the K=0 window is carried by a cell incident to the apex
    incident = [p for p in eqs.counted()
                if any(np.all(np.abs(eqs.vertex_grid[v]) < 1e-9) for v in p.cell_vertices)]
    assert len(incident) == wc.U + wc.N + wc.S


def test_window_touching_boundary_rejected(apex_patch):
    with pytest.raises(WindowError):
        window_counts(apex_patch, (0.0, 0.0), 99)
    with pytest.raises(WindowError):
        window_counts(apex_patch, (0.0, 0.0), -1)


def test_window_needs_grid():
    from polyeq.discretize import hull_of_samples
    cube = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=float)
    with pytest.raises(WindowError):
        window_counts(classify_patch(hull_of_samples(cube)), (0, 0), 1)


# ---- region prediction vs actual anchors -----------------------------------

@pytest.mark.parametrize("seed", [5, 17, 23])
def test_predicted_lattice_sets_equal_actual_anchors(seed):
    """At fine resolution the anchors of each cell family are exactly the
    lattice points of the corresponding predicted region."""
    rng = np.random.default_rng(seed)
    f, rho, lam = random_forms(rng, lam_range=(0.6, 1.6), max_index=40)
    R = predicted_regions(f, rho, lam)
    n, half = 4000, 0.5
    s = quadric_patch(f.L, f.M, f.N, rho, f.E, f.F, f.G, domain=(-half, half, -half * lam, half * lam))
    off = tuple(rng.uniform(0, 1, 2))
    K = int(3 + 2 * math.sqrt(max(imaginary_indices_from_forms(f, rho).as_tuple()))) + 5
    p = discretize_surface(s, n, off, window=window_positions(s, n, off, (0, 0), K, margin=3))
    eqs = classify_patch(p)
    shift = np.array([p.grid_i[0] % 1, p.grid_j[0] % 1])
    actual = {k: set() for k in ("vertex", "T1", "T2", "Q", "h", "v", "d")}
    for q in eqs.counted():
        actual[q.family].add(tuple(np.round(np.array(q.grid_index) - shift).astype(int)))
    regions = {"vertex": R.vertex_ij, "T1": R.faces_ij[0], "T2": R.faces_ij[1], **R.edges_ij}
    mismatch = 0
    for fam, poly in regions.items():
        pts, _ = lattice_points(poly, -shift)
        mismatch += len(set(map(tuple, pts)) ^ actual[fam])
    assert mismatch <= len(eqs.near_degenerate)


# ---- index bands (curves) --------------------------------------------------

def test_ellipse_band_random_offsets():
    rng = np.random.default_rng(0)
    for n in (500, 1000):
        for off in rng.uniform(0, 1, 5):
            fl = curve_flock(ellipse(2.0, 1.0), n, float(off), 0.0, 20)
            assert fl.U_star == pytest.approx(4 / 3) and fl.S_star == pytest.approx(1 / 3)
            assert fl.U in (1, 2) and fl.S in (0, 1) and fl.band_ok


def test_flat_curve_band():
    rng = np.random.default_rng(1)
    for off in rng.uniform(0, 1, 10):
        fl = curve_flock(parabola_arc(-0.01, 1.0), 400, float(off), 0.0, 20)
        assert fl.U in (0, 1) and fl.S == 1


def test_circle_about_centre_is_degenerate():
    with pytest.raises(DegenerateError):
        curve_flock(circle(1.0), 100, 0.3, 0.0, 5)


def test_counts_2d_requires_polygon(apex_patch):
    with pytest.raises(WindowError):
        counts_2d(apex_patch, 0.0, 3)


def test_counts_2d_window():
    poly = discretize_curve(ellipse(2.0, 1.0), 1000, 0.25, center=0.0)
    poly.indices = (poly.indices + 500) % 1000 - 500
    eqs = classify_polygon(poly)
    assert counts_2d(eqs, 0.0, 20) == counts_2d(eqs, 0.0, 40)


# ---- flock reports ---------------------------------------------------------

def test_flock_report_patch_within_bounds():
    s = quadric_patch(-1.0, 0.3, -0.8, 2.0, 1.0, 0.2, 1.3)
    rep = flock_report_patch(s, 150, (0.618, 0.236))
    assert rep.within_bounds == {"U": True, "N": True, "S": True}
    assert rep.smooth_eq.kind == SADDLE
    assert rep.predicted.identity == pytest.approx(-1.0)
    d = rep.to_dict()
    assert set(d["within_bounds"]) == {"U", "N", "S"}


def test_flock_window_full_grid_agrees():
    s = quadric_patch(-1.0, 0.3, -0.8, 2.0)
    a = flock_report_patch(s, 100, (0.3, 0.6), K=8)
    b = flock_report_patch(s, 100, (0.3, 0.6), K=8, full_grid=True)
    assert a.counts == b.counts


@pytest.fixture(scope="module")
def ellipsoid_reports():
    s = ellipsoid(1.25, 1.15, 1.0)
    return {n: closed_surface_report(s, n, offset=(0.618, 0.236)) for n in (50, 100, 200)}


def test_closed_surface_six_flocks(ellipsoid_reports):
    rep = ellipsoid_reports[100]
    assert len(rep.flocks) == 6
    kinds = sorted(f.smooth_eq.kind for f in rep.flocks)
    assert kinds.count(SADDLE) == 2
    assert sum(f.identity for f in rep.flocks) == 2
    U, N, S = rep.census
    assert S + U - N == 2
    for f in rep.flocks:
        assert f.predicted.identity == pytest.approx(-1 if f.smooth_eq.kind == SADDLE else 1)


def test_flock_diameters_shrink(ellipsoid_reports):
    diam = {n: max(f.flock_diameter for f in r.flocks) for n, r in ellipsoid_reports.items()}
    assert diam[50] > diam[100] > diam[200]


def test_cluster_flock_ambiguity_counted():
    from polyeq.analysis import cluster_flocks
    from polyeq.geometry import find_smooth_equilibria
    rep = closed_surface_report(ellipsoid(1.25, 1.15, 1.0), 40, offset=(0.1, 0.2))
    smooth = [f.smooth_eq for f in rep.flocks]
    twice = cluster_flocks(rep.equilibria, smooth + smooth[:1])
    assert twice[0].ambiguous == len(twice[0].members)
    with pytest.raises(WindowError):
        cluster_flocks(rep.equilibria, [])
    assert len(find_smooth_equilibria(ellipsoid(1.25, 1.15, 1.0))) == 6


# ---- lattice experiments ---------------------------------------------------

def test_mc_triangle_square_disk():
    tri = ConvexPolygon.from_vertices([(0, 0), (0.5, 0), (0, 0.5)])
    m, se = expected_count_mc(tri, 20_000, seed=1)
    assert abs(m - 0.125) <= 3 * se
    sq = ConvexPolygon.from_vertices([(0, 0), (1, 0), (1, 1), (0, 1)])
    m, se = expected_count_mc(sq, 1000, seed=2)
    assert m == 1.0 and se == 0.0
    m, se = expected_count_mc(Disk((0.0, 0.0), 0.3), 20_000, seed=3)
    assert abs(m - math.pi * 0.09) <= 3 * se


def test_mc_deterministic_and_validated():
    tri = ConvexPolygon.from_vertices([(0, 0), (1.5, 0), (0, 1.5)])
    assert expected_count_mc(tri, 500, seed=9) == expected_count_mc(tri, 500, seed=9)
    with pytest.raises(ValueError):
        expected_count_mc(tri, 50)


@settings(max_examples=10)
@given(st.integers(0, 10_000))
def test_mc_mean_tracks_area(seed):
    rng = np.random.default_rng(seed)
    from scipy.spatial import ConvexHull
    pts = rng.uniform(-2, 2, size=(8, 2))
    poly = ConvexPolygon.from_vertices(pts[ConvexHull(pts).vertices])
    m, se = expected_count_mc(poly, 20_000, seed=seed)
    assert abs(m - poly.area) <= 4 * se


def test_equidistribution_examples():
    f = equidistribution_fraction((math.sqrt(2), math.sqrt(3)), (0, 0.5, 0, 0.5), 100_000)
    assert abs(f - 0.25) < 0.01
    assert equidistribution_fraction((math.sqrt(2), math.sqrt(3)), (0, 1, 0, 1), 1000) == 1.0
    g = equidistribution_fraction((1 + math.sqrt(5)) / 2, (0.0, 0.3), 100_000)
    assert abs(g - 0.3) < 0.005


def test_equidistribution_polygon_region():
    tri = ConvexPolygon.from_vertices([(0, 0), (1, 0), (0, 1)])
    f = equidistribution_fraction((math.sqrt(2), math.sqrt(3)), tri, 100_000)
    assert abs(f - 0.5) < 2e-2


def test_rational_eta_warns(caplog):
    assert not looks_irrational(0.5) and looks_irrational(math.sqrt(2))
    with caplog.at_level("WARNING"):
        equidistribution_fraction(0.25, (0, 0.5), 100)
    assert "rational" in caplog.text


# ---- running averages ------------------------------------------------------

def shifted_patch():
    su, sv = math.sqrt(2) / 10, math.sqrt(3) / 10
    return quadric_patch(-1.0, 0.0, -1.0, 2.0, domain=(-0.5 + su, 0.5 + su, -0.5 + sv, 0.5 + sv))


def test_min_safe_resolution_fits_window():
    s = shifted_patch()
    k = min_safe_resolution(s, 4)
    counts_for_k(s, k, 4)
    assert grid_offsets(s) == pytest.approx((0.5 - math.sqrt(2) / 10, 0.5 - math.sqrt(3) / 10))


def test_running_averages_small_range_and_resume():
    s = shifted_patch()
    K = 4
    n0 = min_safe_resolution(s, K)
    full = running_averages(s, (0, 0, 0), K, n0, n0 + 30)
    assert len(full.ks) == 31
    assert np.all(full.mean_S >= 0)
    part = {int(k): (int(u), int(n), int(st_)) for k, u, n, st_ in zip(full.ks[:10], full.U, full.N, full.S)}
    seen = []
    resumed = running_averages(s, (0, 0, 0), K, n0, n0 + 30, done=part, on_step=lambda k, c: seen.append(k))
    assert seen == list(range(n0 + 10, n0 + 31))
    assert list(resumed.rows()) == list(full.rows())
    threaded = running_averages(s, (0, 0, 0), K, n0, n0 + 30, workers=3)
    assert list(threaded.rows()) == list(full.rows())


def test_rational_offsets_negative_control(caplog):
    # centred domain: the equilibrium sits at the grid offset 1/2 for every k,
    # so the counts only take the values of two fixed configurations
    s = quadric_patch(-1.0, 0.0, -1.0, 2.0)
    with caplog.at_level("WARNING"):
        ser = running_averages(s, (0, 0, 0), 4, 20, 80)
    assert "rational" in caplog.text
    assert len(set(zip(ser.U, ser.N, ser.S))) <= 2
    assert ser.final_means()[2] != pytest.approx(ser.targets.S_star, rel=0.05)


def test_running_averages_boundary_failure_names_k():
    s = shifted_patch()
    with pytest.raises(Exception, match="k=3"):
        running_averages(s, (0, 0, 0), 10, 3, 4)


def test_saturating_k_contains_regions():
    s = quadric_patch(-1.0, 0.3, -0.8, 2.0)
    from polyeq.geometry import equilibrium_at
    eq = equilibrium_at(s, 0.0, 0.0)
    K = saturating_K(eq, 1.0)
    R = predicted_regions(eq.forms, eq.rho, 1.0)
    assert np.abs(R.vertex_ij.vertices).max() < K


@settings(max_examples=15)
@given(st.integers(0, 100_000))
def test_proximity_clustering_agrees_with_saturated_window(seed):
    from polyeq.analysis import cluster_flocks
    from polyeq.geometry import find_smooth_equilibria
    from polyeq.pebble import cluster_by_hops, vertex_adjacency

    rng = np.random.default_rng(seed)
    f, rho, lam = random_forms(rng, max_index=40)
    s = quadric_patch(f.L, f.M, f.N, rho, f.E, f.F, f.G)
    n = 120
    n_v = max(3, int(round(n / lam)))
    eq = equilibrium_at(s, 0.0, 0.0)
    K = saturating_K(eq, n / n_v)
    assume(K + 3 < min(n, n_v) / 2)
    # a testbed needs the other flocks of the patch (if any) well outside the window
    smooth = [e for e in find_smooth_equilibria(s) if not e.degenerate]
    others = [e for e in smooth if max(abs(e.params[0]) * n, abs(e.params[1]) * n_v) > 1e-6]
    assume(all(max(abs(e.params[0]) * n, abs(e.params[1]) * n_v) > 3 * (K + 2) for e in others))
    patch = discretize_surface(s, n, tuple(rng.random(2)), n_v=n_v)
    eqs = classify_patch(patch)
    assume(not eqs.near_degenerate)
    wc = window_counts(eqs, (0.0, 0.0), K)
    flocks = cluster_flocks(eqs, [eq] + others)
    assert flocks[0].counts == wc.as_tuple()
    in_window = {id(p) for p in flocks[0].members}
    groups = cluster_by_hops(eqs, vertex_adjacency(patch.vertices[..., 0].size, patch.triangles()), 3)
    touching = [g for g in groups if any(id(p) in in_window for p in g)]
    assert {id(p) for g in touching for p in g} == in_window
