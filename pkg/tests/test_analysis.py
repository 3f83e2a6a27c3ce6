import numpy as np
import pytest
import shapely
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq, minimize_scalar

from qtraj.analysis import (ReferenceDensity, ScreenHistogram, bin_average, centroid_winding, compare,
                            crossing_points, find_fringes, helix_probe, histogram, pair_winding,
                            reference_density, screen_intensity, which_way_report)
from qtraj.ensemble import Scenario, ScenarioConfig, default_integration, default_model, run_ensemble
from qtraj.integrator import (ConfigError, Hole, IntegrationConfig, Scheme, ScreenHit, Termination,
                              Trajectory, integrate)
from qtraj.wavefield import DisphericalModel, PacketModel

DISPH = DisphericalModel()
PACKET = PacketModel()


def hits_at(zs, hole=Hole.A):
    return [ScreenHit(i, hole, float(z), 0.0, 50.0) for i, z in enumerate(zs)]


def line(traj_id, hole, z_start, z_end, n=11):
    t = np.linspace(0, 50, n)
    pts = np.zeros((n, 3), dtype=complex)
    pts[:, 0] = t
    pts[:, 2] = np.linspace(z_start, z_end, n)
    return Trajectory(traj_id, hole, Scheme.DBB, t, pts, Termination.REACHED_SCREEN)


def preset_run(name, n, **icfg):
    sc = Scenario(name)
    cfg = ScenarioConfig.preset(sc, n_per_hole=n)
    base = default_integration(sc)
    return run_ensemble(cfg, IntegrationConfig(base.dt, base.t_max, base.screen_x, **icfg),
                        default_model(sc))


# --------------------------------------------------------------- histogram

def test_histogram_uniform_split():
    h = histogram(hits_at([-1, -1, 1, 1]), -2.0, 2.0, 2)
    assert list(h.counts) == [2, 2]
    assert list(h.density) == [0.25, 0.25]
    assert h.normalized and h.out_of_window == 0


def test_histogram_empty():
    h = histogram([], -40.0, 40.0, 100)
    assert not h.counts.any() and not h.density.any()
    assert not h.normalized


@given(st.lists(st.floats(-100, 100), max_size=200))
def test_histogram_conserves_hits(zs):
    h = histogram(hits_at(zs), -40.0, 40.0, 100)
    assert h.counts.sum() + h.out_of_window == len(zs)
    if h.normalized:
        assert np.sum(h.density) * h.bin_width == pytest.approx(1.0, rel=1e-12)


def test_histogram_rejects_bad_window():
    with pytest.raises(ConfigError):
        histogram([], 1.0, -1.0, 10)


# ---------------------------------------------------------------- reference

GRID = np.linspace(-40, 40, 2001)


@pytest.mark.parametrize("model", [PACKET, DISPH], ids=["packet", "dispherical"])
def test_reference_is_even(model):
    v = reference_density(model, GRID).values
    assert np.max(np.abs(v - v[::-1])) <= 1e-12 * v.max()


@pytest.mark.parametrize("model", [PACKET, DISPH], ids=["packet", "dispherical"])
def test_reference_is_normalised(model):
    ref = reference_density(model, GRID)
    assert np.trapezoid(ref.values, ref.z) == pytest.approx(1.0, rel=1e-12)


def test_dispherical_central_bright_fringe():
    v = screen_intensity(DISPH, [-0.1, 0.0, 0.1])
    assert v[1] > v[0] and v[1] > v[2]
    r = np.hypot(50, 10)
    assert v[1] == pytest.approx(4 / r ** 2, rel=1e-12)


def test_dispherical_closed_form_on_screen():
    z = np.linspace(-40, 40, 81)
    r1, r2 = np.hypot(50, z - 10), np.hypot(50, z + 10)
    expected = 1 / r1 ** 2 + 1 / r2 ** 2 + 2 * np.cos(r1 - r2) / (r1 * r2)
    assert screen_intensity(DISPH, z) == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_first_off_centre_maximum_near_one_wavelength_path_difference():
    def path_difference(z):
        return np.hypot(50, z + 10) - np.hypot(50, z - 10) - 2 * np.pi
    z_star = brentq(path_difference, 0, 40)
    res = minimize_scalar(lambda z: -screen_intensity(DISPH, [z])[0],
                          bounds=(z_star - 5, z_star + 5), method="bounded",
                          options={"xatol": 1e-10})
    assert abs(res.x - z_star) < 0.4
    ref = reference_density(DISPH, GRID)
    peaks = find_fringes(ref.values, ref.z)
    assert np.min(np.abs(peaks - res.x)) <= 0.02


def test_packet_reference_defaults_to_arrival_time():
    a = reference_density(PACKET, GRID).values
    b = reference_density(PACKET, GRID, t_eval=50.0).values
    assert np.array_equal(a, b)


def test_reference_rejects_unsorted_grid():
    with pytest.raises(ConfigError):
        reference_density(DISPH, [0.0, -1.0, 1.0])


@pytest.mark.parametrize("n_bins", [7, 100, 333])
def test_bin_average_preserves_integral(n_bins):
    ref = reference_density(DISPH, np.linspace(-40, 40, 1733))
    edges = np.linspace(-40, 40, n_bins + 1)
    avg = bin_average(ref, edges)
    assert np.sum(avg * np.diff(edges)) == pytest.approx(1.0, abs=1e-12)


def test_bin_average_exact_for_piecewise_linear():
    ref = ReferenceDensity(np.array([0.0, 1.0, 3.0]), np.array([0.0, 2.0, 0.0]))
    # triangle; average over [0, 2] is (area 1 + area 1.5) / 2
    assert bin_average(ref, [0.0, 2.0, 3.0]) == pytest.approx([1.25, 0.5], abs=1e-15)


# ------------------------------------------------------------------ compare

def synthetic_hist(density, lo=-40.0, hi=40.0):
    n = len(density)
    counts = np.round(density * 1e6).astype(int)
    return ScreenHistogram(lo, hi, n, counts, np.asarray(density, dtype=float))


def test_compare_identity():
    ref = reference_density(DISPH, np.linspace(-40, 40, 2001))
    dens = bin_average(ref, np.linspace(-40, 40, 101))
    rep = compare(synthetic_hist(dens), ref)
    assert rep.l1_distance == pytest.approx(0.0, abs=1e-15)
    assert rep.max_peak_offset == 0.0 and rep.peaks_agree
    assert len(rep.peak_positions_ref) == 3


def test_compare_one_bin_shift():
    ref = reference_density(DISPH, np.linspace(-40, 40, 2001))
    dens = np.roll(bin_average(ref, np.linspace(-40, 40, 101)), 1)
    rep = compare(synthetic_hist(dens), ref)
    assert rep.l1_distance > 0
    assert rep.max_peak_offset == pytest.approx(0.8, abs=1e-12)


def test_compare_rejects_mismatched_window():
    ref = reference_density(DISPH, np.linspace(-30, 30, 301))
    with pytest.raises(ConfigError):
        compare(histogram([], -40.0, 40.0, 100), ref)


def test_find_fringes_ignores_small_bumps():
    x = np.linspace(-10, 10, 201)
    dens = np.exp(-x ** 2) + 0.01 * np.exp(-(x - 5) ** 2 / 0.01)
    assert list(find_fringes(dens, x)) == pytest.approx([0.0])


# ---------------------------------------------------------------- crossings

def test_two_swapping_lines_cross_once():
    trajs = [line(0, Hole.A, 5, -5), line(1, Hole.B, -5, 5)]
    cps = crossing_points(trajs)
    assert list(cps) == [(0, 1)] and len(cps[(0, 1)]) == 1
    assert cps[(0, 1)][0] == pytest.approx((25.0, 0.0))


def test_parallel_lines_do_not_cross():
    assert crossing_points([line(0, Hole.A, 5, 6), line(1, Hole.B, -5, -6)]) == {}


def test_contact_at_a_vertex_counts_once():
    # both polylines pass through (25, 0) at a shared vertex
    assert sum(map(len, crossing_points([line(0, Hole.A, 5, -5), line(1, Hole.A, -5, 5)]).values())) == 1


def shapely_crossings(trajs):
    """Independent oracle: polyline intersection points, minus a shared start point."""
    out = {}
    for i, a in enumerate(trajs):
        la = shapely.LineString(np.column_stack([a.points[:, 0].real, a.points[:, 2].real]))
        for b in trajs[i + 1:]:
            lb = shapely.LineString(np.column_stack([b.points[:, 0].real, b.points[:, 2].real]))
            inter = la.intersection(lb)
            pts = [g for g in getattr(inter, "geoms", [inter]) if not g.is_empty]
            start_a = (a.points[0, 0].real, a.points[0, 2].real)
            start_b = (b.points[0, 0].real, b.points[0, 2].real)
            pts = [p for p in pts if not (start_a == start_b and p.distance(shapely.Point(start_a)) < 1e-9)]
            if pts:
                out[(a.id, b.id)] = len(pts)
    return out


def test_crossings_match_shapely_oracle():
    trajs = preset_run("mdbb-packet", 10).trajectories
    fast = {k: len(v) for k, v in crossing_points(trajs).items()}
    assert fast == shapely_crossings(trajs)
    assert sum(fast.values()) > 0


def test_which_way_report_dbb_packet():
    res = preset_run("dbb-packet", 50)
    rep = which_way_report(res.hits, res.trajectories)
    assert rep.separable and rep.which_way
    assert rep.crossings_ab == 0
    assert rep.n_hits_a == rep.n_hits_b == 50


def test_which_way_report_mdbb_stationary():
    res = preset_run("mdbb-stationary", 50)
    rep = which_way_report(res.hits, res.trajectories)
    assert not rep.separable and rep.crossings_ab > 0


def test_which_way_report_synthetic():
    trajs = [line(0, Hole.A, 5, -5), line(1, Hole.B, -5, 5)]
    hits = [ScreenHit(0, Hole.A, -5.0, 0.0, 50.0), ScreenHit(1, Hole.B, 5.0, 0.0, 50.0)]
    rep = which_way_report(hits, trajs)
    assert (rep.crossings_ab, rep.crossings_aa, rep.crossings_bb) == (1, 0, 0)
    # the hit ranges are still disjoint, only on the swapped sides
    assert rep.separable and rep.range_a == (-5.0, -5.0) and rep.range_b == (5.0, 5.0)


# -------------------------------------------------------------------- helix

def test_helix_single_trajectory_matches_screen_hit():
    traj, hit = integrate(PACKET, Scheme.MDBB, [0.3j, 0, 10 + 1.5j], IntegrationConfig(record_stride=1))
    probe = helix_probe([traj], [50.0])
    (tid, hole, z_r, z_i), = probe.points[50.0]
    assert (tid, hole) == (0, Hole.A)
    assert z_r == pytest.approx(hit.z_r, abs=1e-12) and z_i == pytest.approx(hit.z_i, abs=1e-12)


def test_helix_dbb_is_flat():
    trajs = preset_run("dbb-packet", 10).trajectories
    probe = helix_probe(trajs, [20.0, 30.0, 40.0, 50.0])
    for plane in probe.planes:
        assert len(probe.points[plane]) == 20 and probe.missing[plane] == 0
        assert all(row[3] == 0 for row in probe.points[plane])


def test_helix_counts_missing_trajectories():
    trajs = [line(0, Hole.A, 5, 6)]
    trajs[0].points[:, 0] *= 0.5  # stops at x_r = 25
    probe = helix_probe(trajs, [20.0, 30.0])
    assert len(probe.points[20.0]) == 1 and probe.missing[30.0] == 1


def test_helix_mdbb_stationary_winds():
    trajs = preset_run("mdbb-stationary", 50, record_stride=1).trajectories
    probe = helix_probe(trajs, [20.0, 30.0, 40.0, 50.0])
    pairs = pair_winding(probe)
    assert pairs and max(abs(v) for v in pairs.values()) > 0
    assert max(abs(v) for v in centroid_winding(probe).values()) > 0
