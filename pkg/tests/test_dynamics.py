import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import solve_ivp

from conftest import BUMP, FLAT
from hypbill.dynamics import (
    GrazingCollision,
    PhasePoint,
    StepUnderflow,
    flow,
    geodesic_step,
    horizon_probe,
    next_collision,
    sample_ensemble,
    step_sizes,
)
from hypbill.geometry import wall_frame


def geodesic_rhs(metric):
    def f(t, s):
        x, y, vx, vy = s
        _, gx, gy = metric.phi_grad(x, y)
        dot = gx * vx + gy * vy
        v2 = vx * vx + vy * vy
        return [vx, vy, v2 * gx - 2 * dot * vx, v2 * gy - 2 * dot * vy]

    return f


def torus_gap(p, q, L=(1.0, 1.0)):
    d = np.asarray(p, float) - np.asarray(q, float)
    d -= np.round(d / L) * L
    return float(np.max(np.abs(d)))


def test_flat_free_flight_is_a_straight_line(empty_flat):
    rec = flow(empty_flat, PhasePoint((0.0, 0.0), (1.0, 0.0)), 3.0, stride=0.5)
    assert rec.events == [] and rec.termination == "time-limit"
    assert rec.samples[-1, 0] == 3.0
    assert torus_gap(rec.samples[-1, 1:3], (0.0, 0.0)) < 1e-12


def test_head_on_hit_time_and_reversal(one_disk):
    st_ = PhasePoint((0.5, 0.05), (0.0, 1.0))
    ev = next_collision(one_disk, st_, 5.0)
    assert ev.time == pytest.approx(0.45 - 0.3, abs=1e-12)
    assert ev.theta == pytest.approx(math.pi / 2)
    assert ev.v_out == pytest.approx((0.0, -1.0))


def test_geodesic_step_matches_dop853_oracle():
    p = PhasePoint.from_angle(BUMP, 0.2, 0.3, 0.9)
    out, corr = geodesic_step(BUMP, p, 1.3)
    ref = solve_ivp(geodesic_rhs(BUMP), (0, 1.3), p.position + p.velocity, method="DOP853", rtol=1e-12, atol=1e-13)
    assert torus_gap(out.position, ref.y[:2, -1]) < 1e-9
    assert np.allclose(out.velocity, ref.y[2:, -1], atol=1e-9)
    assert corr < 1e-9
    assert out.speed(BUMP) == pytest.approx(1.0, abs=1e-12)


def test_curved_collision_matches_event_oracle(bump_table):
    c, R = (0.5, 0.5), 0.2
    for ang in (0.2, 0.8, 1.9):
        p = PhasePoint.from_angle(BUMP, 0.1, 0.15, ang)
        ev = next_collision(bump_table, p, 3.0)

        def hit(t, s):
            dx, dy = s[0] - c[0], s[1] - c[1]
            return math.hypot(dx - round(dx), dy - round(dy)) - R

        hit.terminal, hit.direction = True, -1
        ref = solve_ivp(geodesic_rhs(BUMP), (0, 3.0), p.position + p.velocity, method="DOP853",
                        rtol=1e-12, atol=1e-13, events=hit)
        if ev is None:
            assert ref.t_events[0].size == 0
            continue
        assert ref.t_events[0].size == 1
        assert ev.time == pytest.approx(ref.t_events[0][0], abs=1e-8)
        assert torus_gap(ev.position, ref.y_events[0][0][:2]) < 1e-8


@pytest.mark.parametrize("which", ["two_disk", "bump_table"])
def test_reflection_preserves_tangential_and_flips_normal(which, request):
    table = request.getfixturevalue(which)
    m = table.metric
    ens = sample_ensemble(table, 4, seed=11)
    n = 0
    for p in ens:
        rec = flow(table, p, 3.0)
        for ev in rec.events:
            f = wall_frame(table.walls[ev.wall_index], ev.r, m)
            x, y = ev.position
            assert m.inner(x, y, ev.v_out, f.T) == pytest.approx(m.inner(x, y, ev.v_in, f.T), abs=1e-9)
            assert m.inner(x, y, ev.v_out, f.N) == pytest.approx(-m.inner(x, y, ev.v_in, f.N), abs=1e-9)
            assert math.sin(ev.theta) == pytest.approx(abs(m.inner(x, y, ev.v_in, f.N)), abs=1e-9)
            n += 1
    assert n > 0


def test_tangential_start_signals_grazing(one_disk):
    p = PhasePoint((0.1, 0.8), (1.0, 0.0))
    with pytest.raises(GrazingCollision):
        next_collision(one_disk, p, 2.0)
    rec = flow(one_disk, p, 2.0)
    assert rec.termination == "grazing" and rec.grazing is not None
    assert rec.t_end == pytest.approx(0.4, abs=1e-6)


def test_curved_flow_keeps_unit_speed_and_stays_outside(bump_table):
    rec = flow(bump_table, sample_ensemble(bump_table, 1, seed=2)[0], 4.0, stride=0.05)
    assert rec.max_correction < 1e-9
    for row in rec.samples:
        assert bump_table.contains(row[1:3], tol=1e-6)
        assert BUMP.norm(row[1], row[2], row[3:5]) == pytest.approx(1, abs=1e-9)


def test_short_time_reversal_flat_and_curved(two_disk, bump_table):
    for table, T in ((two_disk, 4.0), (bump_table, 1.5)):
        for p in sample_ensemble(table, 3, seed=5):
            fwd = flow(table, p, T)
            back = flow(table, fwd.final.reversed(), T)
            assert torus_gap(back.final.position, p.position) < 1e-6
            assert np.allclose(back.final.velocity, [-v for v in p.velocity], atol=1e-6)


def test_extended_precision_reversal_over_long_times(two_disk):
    p = sample_ensemble(two_disk, 1, seed=9)[0]
    fwd = flow(two_disk, p, 30.0, precision=100)
    back = flow(two_disk, fwd.final.reversed(), 30.0, precision=100)
    assert torus_gap(back.final.as_float().position, p.position) < 1e-12
    assert len(fwd.events) == len(back.events)


def test_precision_mode_rejects_curved_tables(bump_table):
    with pytest.raises(ValueError):
        flow(bump_table, sample_ensemble(bump_table, 1, 0)[0], 1.0, precision=50)


def test_collisions_are_ordered_and_free_paths_positive(two_disk):
    rec = flow(two_disk, sample_ensemble(two_disk, 1, seed=3)[0], 50.0)
    times = [ev.time for ev in rec.events]
    assert times == sorted(times)
    assert np.all(rec.free_paths() > 0)
    segs = list(rec.segments())
    assert len(segs) == len(rec.events) + 1 and segs[-1].t1 == rec.t_end


def test_sample_ensemble_is_seeded_and_clear_of_walls(two_disk):
    a = sample_ensemble(two_disk, 20, seed=4)
    b = sample_ensemble(two_disk, 20, seed=4)
    assert a == b
    assert a != sample_ensemble(two_disk, 20, seed=5)
    for p in a:
        assert min(two_disk.signed_distances(p.position)) > 1e-6
        assert p.speed(FLAT) == pytest.approx(1.0)


def test_horizon_probe_finds_corridors_of_single_disk(one_disk):
    rep = horizon_probe(one_disk, 360, 10, 20.0, seed=1)
    assert not rep.finite_horizon_evidence
    angles = {round(math.degrees(a)) % 360 for _, _, a in rep.capped}
    assert 0 in angles or 180 in angles
    assert 90 in angles or 270 in angles


def test_horizon_probe_four_disk_table_has_finite_horizon(four_disk):
    rep = horizon_probe(four_disk, 1440, 30, 50.0, seed=2)
    assert rep.finite_horizon_evidence
    assert rep.max_free_time < 1.0


def test_two_disk_table_has_diagonal_corridors(two_disk):
    # y = x - 1/2 stays 0.354 > 0.3 away from every disk center
    rec = flow(two_disk, PhasePoint.from_angle(FLAT, 0.5, 0.0, math.pi / 4), 100.0)
    assert rec.events == []


@given(st.floats(1e-6, 5.0), st.floats(1e-4, 0.1))
def test_step_sizes_cover_duration(duration, h):
    steps = step_sizes(duration, h)
    assert math.fsum(steps) == pytest.approx(duration, abs=1e-12)
    assert all(0 < s <= h * (1 + 1e-9) for s in steps)


def test_step_underflow_is_an_error():
    with pytest.raises(StepUnderflow):
        step_sizes(1.0, 1e-13)
