import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtraj import _kernels
from qtraj import wavefield as wf
from qtraj.ensemble import _circle_starts, _interior_angles
from qtraj.integrator import (ConfigError, IntegrationConfig, Scheme, Termination, _kernel_model,
                              integrate, integrate_batch, rk4_step)
from qtraj.wavefield import DisphericalModel, NodePoint, PacketModel

PACKET = PacketModel()
DISPH = DisphericalModel()


def semicircle(n, a=1e-3, z0=10.0):
    theta = _interior_angles(-np.pi / 2, np.pi / 2, n)
    return np.column_stack([a * np.cos(theta), np.zeros(n), z0 + a * np.sin(theta)]).astype(complex)


# ------------------------------------------------------------ single steps

def test_packet_dbb_step_is_exact_for_constant_field():
    p = rk4_step(PACKET, Scheme.DBB, [0, 0, 7], 0.0, 0.01)
    assert p.x == 0.01


def test_packet_mdbb_step_keeps_x_imaginary_part():
    p = rk4_step(PACKET, Scheme.MDBB, [0.7j, 0, 10 + 2j], 3.0, 0.01)
    assert p.x.imag == 0.7


@given(st.floats(-3, 3), st.floats(-20, 20), st.floats(-4, 4), st.floats(0, 49))
@settings(max_examples=50)
def test_packet_mdbb_x_imaginary_part_never_changes(xi, zr, zi, t):
    p = rk4_step(PACKET, Scheme.MDBB, [1j * xi, 0, zr + 1j * zi], t, 0.01)
    assert p.x.imag == xi


def test_rk4_step_raises_at_node():
    with pytest.raises(NodePoint):
        rk4_step(PACKET, Scheme.MDBB, [0, 0, 1j * np.pi / 10], 0.0, 0.01)


def test_rk4_step_rejects_complex_dbb_point():
    with pytest.raises(ConfigError):
        rk4_step(DISPH, Scheme.DBB, [1, 0, 1j], 0.0, 0.01)


# ------------------------------------------------- compiled field evaluation

def sample_points(rng, n):
    return np.column_stack([rng.uniform(0.5, 60, n) + 1j * rng.uniform(-5, 5, n),
                            rng.uniform(-2, 2, n) + 1j * rng.uniform(-1, 1, n),
                            rng.uniform(-30, 30, n) + 1j * rng.uniform(-5, 5, n)])


@pytest.mark.parametrize("model", [PACKET, DISPH], ids=["packet", "dispherical"])
@pytest.mark.parametrize("real", [False, True], ids=["MdBB", "dBB"])
def test_kernel_velocity_matches_wavefield(model, real):
    rng = np.random.default_rng(5)
    pts = sample_points(rng, 500)
    if real:
        pts = pts.real.astype(complex)
    t = 12.5
    kind, params = _kernel_model(model)
    ref, ref_status = wf.velocity(model, pts, t, real=real)
    for p, v_ref, s_ref in zip(pts, ref, ref_status):
        vx, vy, vz, s = _kernels.velocity(kind, params, real, p[0], p[1], p[2], t)
        assert s == s_ref
        v = np.array([vx, vy, vz])
        assert np.max(np.abs(v - v_ref)) <= 1e-13 * max(1.0, np.max(np.abs(v_ref)))


@pytest.mark.parametrize("p, model, status", [
    ([0, 0, 1j * np.pi / 10], PACKET, wf.NODE),
    ([0, 0, 10], DISPH, wf.SINGULAR),
    ([0, 0, -10], DISPH, wf.SINGULAR),
])
def test_kernel_failure_status_matches_wavefield(p, model, status):
    kind, params = _kernel_model(model)
    assert _kernels.velocity(kind, params, False, *np.asarray(p, dtype=complex), 0.0)[3] == status
    assert wf.velocity(model, np.asarray(p, dtype=complex), 0.0)[1] == status


def test_kernel_branch_rule_matches_principal_sqrt():
    for w in (-225 + 0j, complex(-225, -0.0), complex(-4, 1e-300), 9 + 0j, 3 - 4j):
        assert _kernels._psqrt(w) == wf.principal_sqrt(w)


# ------------------------------------------------------------ trajectories

def test_dispherical_dbb_100_steps_match_fine_step_oracle():
    cfg = IntegrationConfig(dt=0.01, t_max=1.0, screen_x=50.0, record_stride=1)
    starts = semicircle(3)
    coarse, _ = integrate_batch(DISPH, Scheme.DBB, starts, cfg)
    fine, _ = integrate_batch(DISPH, Scheme.DBB, starts, cfg.refined(100))
    for c, f in zip(coarse, fine):
        assert c.termination is Termination.TIME_EXPIRED and len(c.t) == 101
        assert np.max(np.abs(c.points[-1] - f.points[-1])) < 1e-6


def test_dispherical_dbb_screen_position_matches_fine_step_oracle():
    cfg = IntegrationConfig(dt=0.01, t_max=150.0)
    starts = semicircle(8)
    _, coarse = integrate_batch(DISPH, Scheme.DBB, starts, cfg, keep_samples=False)
    _, fine = integrate_batch(DISPH, Scheme.DBB, starts, cfg.refined(100), keep_samples=False)
    assert [h.traj_id for h in coarse] == [h.traj_id for h in fine] and len(coarse) >= 4
    errors = np.array([abs(c.z_r - f.z_r) for c, f in zip(coarse, fine)])
    assert np.all(errors < 1e-3), errors


@pytest.mark.parametrize("scheme", list(Scheme))
def test_packet_arrives_at_screen_at_t_max(scheme):
    traj, hit = integrate(PACKET, scheme, [0, 0, 10], IntegrationConfig())
    assert traj.termination is Termination.REACHED_SCREEN
    assert hit.t_hit == 50.0 and traj.t[-1] == 50.0


def test_start_beyond_screen_is_a_config_error():
    with pytest.raises(ConfigError):
        integrate(PACKET, Scheme.DBB, [60, 0, 10], IntegrationConfig())
    with pytest.raises(ConfigError):
        integrate(PACKET, Scheme.DBB, [50, 0, 10], IntegrationConfig())


def test_dbb_start_must_be_real():
    with pytest.raises(ConfigError):
        integrate(DISPH, Scheme.DBB, [1, 0, 10 + 1j], IntegrationConfig())


@pytest.mark.parametrize("key, kwargs", [("dt", dict(dt=-1)), ("t_max", dict(t_max=0)),
                                         ("screen_x", dict(screen_x=float("nan"))),
                                         ("record_stride", dict(record_stride=0))])
def test_integration_config_validation_names_key(key, kwargs):
    with pytest.raises(ConfigError, match=key):
        IntegrationConfig(**kwargs)


def test_integration_is_deterministic():
    start = [0, 0, 10 + 1.5j]
    a = integrate(PACKET, Scheme.MDBB, start, IntegrationConfig())
    b = integrate(PACKET, Scheme.MDBB, start, IntegrationConfig())
    assert a == b


def test_dbb_trajectories_stay_real():
    trajs, hits = integrate_batch(DISPH, Scheme.DBB, semicircle(8), IntegrationConfig(t_max=150.0))
    for tr in trajs:
        assert np.all(tr.points.imag == 0)
    assert all(h.z_i == 0 for h in hits) and len(hits) > 0


def test_screen_hit_is_first_crossing():
    trajs, hits = integrate_batch(DISPH, Scheme.DBB, semicircle(8),
                                  IntegrationConfig(t_max=150.0, record_stride=1))
    for tr in trajs:
        if tr.hit is None:
            continue
        xr = tr.points[:, 0].real
        assert np.all(xr[:-1] < 50.0 - 1e-9)
        assert tr.t[-2] <= tr.hit.t_hit <= tr.t[-1]
        # linear interpolation between the last two samples reproduces the hit
        frac = (tr.hit.t_hit - tr.t[-2]) / (tr.t[-1] - tr.t[-2])
        z = tr.points[-2, 2] + frac * (tr.points[-1, 2] - tr.points[-2, 2])
        assert z.real == pytest.approx(tr.hit.z_r, abs=1e-9)


def test_keep_samples_flag_does_not_change_results():
    starts = semicircle(6)
    cfg = IntegrationConfig(t_max=150.0)
    full, hits_full = integrate_batch(DISPH, Scheme.DBB, starts, cfg)
    light, hits_light = integrate_batch(DISPH, Scheme.DBB, starts, cfg, keep_samples=False)
    assert hits_full == hits_light
    for a, b in zip(full, light):
        assert a.termination is b.termination
        assert np.array_equal(a.points[-1], b.points[-1]) and a.t[-1] == b.t[-1]
        assert len(b.t) == 2


@pytest.mark.parametrize("model, start, term", [
    (PACKET, [0, 0, 1j * np.pi / 10], Termination.NODE_POINT),
    (DISPH, [0, 0, 10], Termination.SINGULAR_POINT),
    (PACKET, [0, 0, 2e6j], Termination.OVERFLOW),
])
def test_failures_terminate_with_tag_and_keep_trajectory(model, start, term):
    traj, hit = integrate(model, Scheme.MDBB, start, IntegrationConfig())
    assert traj.termination is term and hit is None
    assert len(traj.t) >= 1 and np.array_equal(traj.points[0], np.asarray(start, dtype=complex))


def test_branch_cross_is_a_real_cut_crossing():
    starts = _circle_starts(10.0, 15.0, _interior_angles(0, 2 * np.pi, 40))
    cfg = IntegrationConfig(t_max=150.0, record_stride=1)
    trajs, _ = integrate_batch(DISPH, Scheme.MDBB, starts, cfg)
    crossed = [t for t in trajs if t.termination is Termination.BRANCH_CROSS]
    assert crossed
    for tr in crossed[:5]:
        # the next step from the terminal state takes r1^2 or r2^2 across the negative real axis
        p_old = tr.points[-1]
        p_new = np.asarray(rk4_step(DISPH, Scheme.MDBB, p_old, tr.t[-1], cfg.dt))
        w_old = np.array(wf.source_distances_squared(DISPH, p_old))
        w_new = np.array(wf.source_distances_squared(DISPH, p_new))
        flip = w_old.imag * w_new.imag < 0
        at_axis = w_old.real - w_old.imag * (w_new.real - w_old.real) / (w_new.imag - w_old.imag)
        assert np.any(flip & (at_axis < 0))


def test_rk4_global_order():
    """Halving dt cuts the endpoint error (against a dt/100 reference) by about 2^4."""
    starts = _circle_starts(10.0, 15.0, _interior_angles(0, 2 * np.pi, 10))
    dt, horizon = 0.2, 10.0

    def endpoints(step):
        cfg = IntegrationConfig(dt=step, t_max=horizon, screen_x=50.0)
        trajs, _ = integrate_batch(DISPH, Scheme.MDBB, starts, cfg, keep_samples=False)
        assert all(t.termination is Termination.TIME_EXPIRED for t in trajs)
        return np.array([t.points[-1] for t in trajs])

    ref = endpoints(dt / 100)
    e1 = np.abs(endpoints(dt) - ref).max(axis=1)
    e2 = np.abs(endpoints(dt / 2) - ref).max(axis=1)
    ratios = e1 / e2
    assert np.all((ratios >= 12) & (ratios <= 20)), ratios
