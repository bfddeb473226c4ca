import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from conftest import BUMP, FLAT, harness
from hypbill.dynamics import CollisionEvent, PhasePoint, Segment, flow, sample_ensemble
from hypbill.tangent import (
    JacobiFrame,
    MeshCollisionError,
    TangentMatrix,
    TangentTimeline,
    alpha_bound,
    cocycle,
    collision_matrix,
    jacobi_collision,
    jacobi_flight,
    riccati_along,
    riccati_collision,
    riccati_consistency_check,
    riccati_direct,
    riccati_flight,
)


def seg(duration, metric=FLAT, angle=0.4, start=(0.1, 0.2)):
    p = PhasePoint.from_angle(metric, start[0], start[1], angle)
    return Segment(0.0, duration, p.position, p.velocity)


def event(kappa, theta):
    return CollisionEvent(0.0, 0, 0.0, theta, kappa, (0.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (1.0, 0.0))


def test_flat_flight_matrix():
    frame, M = jacobi_flight(FLAT, seg(2.5), JacobiFrame(0.3, -0.2))
    assert (M.a, M.b, M.c, M.d) == (1.0, 2.5, 0.0, 1.0)
    assert frame.y == pytest.approx(0.3 + 2.5 * -0.2) and frame.ydot == -0.2


def test_hyperbolic_harness_flight_is_sinh_cosh():
    frame, M = jacobi_flight(harness(-1.0), seg(1.0), JacobiFrame(0.0, 1.0))
    assert frame.y == pytest.approx(math.sinh(1), abs=1e-10)
    assert frame.ydot == pytest.approx(math.cosh(1), abs=1e-10)
    assert M.det == pytest.approx(1.0, abs=1e-12)


def test_spherical_harness_flight_is_cos():
    frame, _ = jacobi_flight(harness(1.0), seg(math.pi / 2), JacobiFrame(1.0, 0.0))
    assert frame.y == pytest.approx(0.0, abs=1e-10)
    assert frame.ydot == pytest.approx(-1.0, abs=1e-10)


def test_curved_flight_determinant_is_one():
    _, M = jacobi_flight(BUMP, seg(2.0, BUMP), JacobiFrame(1.0, 0.0))
    assert abs(M.det - 1) < 1e-10


def test_collision_examples():
    f, M = jacobi_collision(JacobiFrame(1.0, 0.0), event(-1.0, math.pi / 2))
    assert (f.y, f.ydot) == (-1.0, -2.0)
    assert M.det == 1.0
    f, _ = jacobi_collision(JacobiFrame(0.7, -0.4), event(0.0, 0.9))
    assert (f.y, f.ydot) == (-0.7, 0.4)
    assert riccati_collision(0.0, event(-1.0, math.pi / 2)) == 2.0
    assert riccati_collision(0.0, event(-1 / 0.3, math.pi / 2)) == pytest.approx(2 / 0.3)
    assert riccati_collision(5.0, event(0.0, 0.4)) == 5.0
    with pytest.raises(ValueError):
        riccati_collision(0.0, event(-1.0, 0.0))


@given(st.floats(-10, -0.1), st.floats(0.05, math.pi / 2), st.floats(-5, 5))
def test_riccati_jump_agrees_with_jacobi_map(kappa, theta, u):
    ev = event(kappa, theta)
    f, M = jacobi_collision(JacobiFrame(1.0, u), ev)
    assert riccati_collision(u, ev) == pytest.approx(f.ydot / f.y, abs=1e-10)
    assert M.det == 1.0


def test_riccati_flight_closed_forms():
    assert np.all(riccati_flight(FLAT, seg(3.0), 0.0).u == 0.0)
    tr = riccati_flight(harness(-1.0), seg(1.0), 0.0)
    assert tr.u[-1] == pytest.approx(math.tanh(1), abs=1e-9)
    tr = riccati_flight(harness(1.0), seg(2.0), 0.0)
    assert len(tr.blowup_times) == 1
    assert tr.blowup_times[0] == pytest.approx(math.pi / 2, abs=1e-9)
    tr = riccati_flight(FLAT, seg(1.0), 1.0)
    assert tr.u[-1] == pytest.approx(0.5, abs=1e-14)


def test_riccati_state_defined_mask_excludes_blowup_window():
    tr = riccati_flight(harness(1.0), seg(2.0), 0.0)
    mask = tr.defined_mask()
    assert not mask[np.abs(tr.t - math.pi / 2) <= 1e-3].any()
    ok = mask & np.isfinite(tr.u)
    assert np.allclose(tr.u[ok], tr.ydot[ok] / tr.y[ok], rtol=1e-8)


def test_consistency_flat_is_exact():
    s = seg(2.0)
    assert riccati_consistency_check(riccati_flight(FLAT, s, 0.0), riccati_direct(FLAT, s, 0.0)) == 0.0


@given(st.floats(-0.5, 2.0), st.floats(0, 2 * math.pi))
def test_consistency_on_curved_segments(u0, angle):
    s = seg(0.5, BUMP, angle)
    a, b = riccati_flight(BUMP, s, u0), riccati_direct(BUMP, s, u0)
    assume(not a.blowup_times)
    assert riccati_consistency_check(a, b) < 1e-8


def test_consistency_through_blowups():
    for metric, u0, T in ((BUMP, -3.0, 1.0), (harness(1.0), 0.0, 3.0), (FLAT, -2.0, 1.5)):
        s = seg(T, metric)
        a, b = riccati_flight(metric, s, u0), riccati_direct(metric, s, u0)
        assert a.blowup_times
        assert len(a.blowup_times) == len(b.blowup_times)
        assert np.allclose(a.blowup_times, b.blowup_times, atol=1e-6)
        assert riccati_consistency_check(a, b) < 1e-6


def test_cocycle_on_flat_free_flight(empty_flat):
    rec = flow(empty_flat, PhasePoint((0.0, 0.0), (0.6, 0.8)), 3.0)
    mats = cocycle(empty_flat, rec, [0.0, 1.0, 2.0])
    assert [(m.a, m.b, m.c, m.d) for m in mats] == [(1.0, 1.0, 0.0, 1.0)] * 2


def test_cocycle_rejects_mesh_on_collision(two_disk):
    rec = flow(two_disk, sample_ensemble(two_disk, 1, 3)[0], 10.0)
    t = rec.events[2].time
    with pytest.raises(MeshCollisionError):
        cocycle(two_disk, rec, [0.0, t + 5e-10, 9.0])
    with pytest.raises(ValueError):
        cocycle(two_disk, rec, [1.0, 0.5])


def test_sinai_cocycle_at_collision_midpoints_has_unit_determinants(two_disk):
    rec = flow(two_disk, sample_ensemble(two_disk, 1, 8)[0], 60.0)
    times = [ev.time for ev in rec.events]
    mesh = [0.5 * (a + b) for a, b in zip(times, times[1:])]
    mats = cocycle(two_disk, rec, mesh)
    assert len(mats) > 100
    assert max(abs(m.det - 1) for m in mats) < 1e-8


@pytest.mark.parametrize("which", ["two_disk", "bump_table"])
def test_cocycle_semigroup(which, request):
    table = request.getfixturevalue(which)
    rec = flow(table, sample_ensemble(table, 1, 4)[0], 3.0)
    t0, t1, t2 = 0.1234, 1.3779, 2.6021
    a, b, c = (cocycle(table, rec, m)[0] for m in ([t0, t1], [t1, t2], [t0, t2]))
    prod = (b @ a).as_array()
    assert np.max(np.abs(prod - c.as_array())) < 1e-8 * max(1.0, np.abs(c.as_array()).max())


def test_timeline_scan_matches_jacobi_transport(two_disk):
    rec = flow(two_disk, sample_ensemble(two_disk, 1, 6)[0], 5.0)
    tl = TangentTimeline(two_disk, rec)
    times = [0.7, 1.9, 3.3]
    pts = tl.scan(0.2, 4.0, 0.4, times)
    for sp in pts:
        M = tl.matrix(0.2, sp.t).as_array()
        y, yd = M @ np.array([1.0, 0.4])
        assert sp.u == pytest.approx(yd / y, rel=1e-10)
        assert sp.collisions == tl.collisions_between(0.2, sp.t)


def test_riccati_along_flags_collisions_and_jumps(two_disk):
    rec = flow(two_disk, sample_ensemble(two_disk, 1, 6)[0], 5.0)
    rows = riccati_along(two_disk, rec, 0.0, 0.05)
    jumps = [r for r in rows if r[5] == 1]
    assert len(jumps) == len(rec.events)
    # from u = 0 on a flat flight u stays 0 until the first collision
    before = [r for r in rows if r[0] < rec.events[0].time]
    assert all(r[1] == 0.0 for r in before)
    assert jumps[0][1] == pytest.approx(2 / 0.3 / rec.events[0].sin_theta)


def test_riccati_along_records_blowups(empty_flat):
    rec = flow(empty_flat, PhasePoint((0.0, 0.0), (1.0, 0.0)), 2.0)
    rows = riccati_along(empty_flat, rec, -1.0, 0.1)
    blow = [r for r in rows if r[4] == 1]
    assert len(blow) == 1 and blow[0][0] == pytest.approx(1.0, abs=1e-12)


# --- properties of the Riccati equation on constant-curvature segments


@given(st.floats(-4, 4), st.floats(-3, 3), st.floats(0, 3), st.floats(0.05, 1.0))
def test_monotone_dependence_on_initial_value(K, u0, du, T):
    m = harness(K)
    a = riccati_flight(m, seg(T), u0, stride=T / 20)
    b = riccati_flight(m, seg(T), u0 + du, stride=T / 20)
    assume(not a.blowup_times and not b.blowup_times)
    assert np.all(b.u >= a.u - 1e-12)


@given(st.floats(-4, 4), st.floats(-1.9, 3), st.floats(0, 1), st.floats(0.01, 1.0))
def test_gap_between_nearby_solutions_grows_at_most_exponentially(K, v0, frac, T):
    A, C = 2.0, 1.0
    gap0 = frac * math.exp(-4 * A * C)
    m = harness(K)
    v = riccati_flight(m, seg(T), v0, stride=T / 50)
    u = riccati_flight(m, seg(T), v0 + gap0, stride=T / 50)
    assume(not u.blowup_times and not v.blowup_times)
    assume(np.all(u.u >= -A))
    assert u.u[-1] - v.u[-1] <= gap0 * math.exp(2 * A * T) + 1e-6


@given(st.floats(0, 4), st.floats(-1, 1), st.floats(-50, 50), st.floats(1e-3, 1.0))
def test_alpha_bounds_terminal_u(k_max, frac, u0, eta):
    K = frac * k_max
    tr = riccati_flight(harness(K), seg(eta), u0, stride=eta)
    assume(not tr.blowup_times)
    assert tr.u[-1] <= alpha_bound(k_max, eta) + 1e-6


def test_alpha_is_attained_by_the_extreme_solution():
    # u0 -> +inf on K = -k_max reaches sqrt(k) coth(sqrt(k) eta)
    k, eta = 2.0, 0.3
    tr = riccati_flight(harness(-k), seg(eta), 1e12, stride=eta)
    assert tr.u[-1] == pytest.approx(alpha_bound(k, eta), rel=1e-6)


def test_alpha_flat_limit_is_continuous():
    assert alpha_bound(0.0, 0.25) == 4.0
    assert alpha_bound(1e-12, 0.25) == pytest.approx(4.0, rel=1e-9)
    assert alpha_bound(1e-20, 0.25) == pytest.approx(4.0, rel=1e-12)
    with pytest.raises(ValueError):
        alpha_bound(1.0, 0.0)


def test_tangent_matrix_algebra():
    A = TangentMatrix(2.0, 1.0, 1.0, 1.0, 0.0, 1.0)
    B = TangentMatrix(1.0, 0.5, 0.0, 1.0, 1.0, 2.0)
    P = B @ A
    assert np.allclose(P.as_array(), B.as_array() @ A.as_array())
    assert (P.t_start, P.t_end) == (0.0, 2.0)
    assert np.allclose((A.inverse() @ A).as_array(), np.eye(2))
    assert collision_matrix(event(-2.0, 0.5)).det == 1.0
