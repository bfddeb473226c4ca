import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import BUMP, FLAT
from hypbill.geometry import (
    ArcLength,
    BilliardTable,
    CircleWall,
    LineWall,
    MetricField,
    SplineWall,
    TableError,
    curvature_at,
    is_dispersing,
    parse_table,
    table_from_dict,
    table_to_dict,
    wall_frame,
)


def fd_laplacian(metric, x, y, h=1e-4):
    f = metric.phi
    return (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4 * f(x, y)) / h**2


def test_flat_curvature_is_exactly_zero():
    assert curvature_at(FLAT, (0.3, 0.7)) == 0.0
    assert curvature_at(MetricField(1, 1, ((0, 0, 0.4, 0.0),)), (0.1, 0.2)) == 0.0


def test_single_mode_curvature_matches_closed_form_and_finite_differences():
    a, L = 0.2, 2.0
    m = MetricField(L, L, ((1, 0, a, 0.0),))
    expected = math.exp(-2 * a) * a * (2 * math.pi / L) ** 2
    assert curvature_at(m, (0.0, 0.0)) == pytest.approx(expected, rel=1e-12)
    fd = -math.exp(-2 * m.phi(0.0, 0.0)) * fd_laplacian(m, 0.0, 0.0, 1e-5)
    assert fd == pytest.approx(expected, rel=1e-5)


@given(st.floats(0, 1), st.floats(0, 1))
def test_curvature_matches_finite_difference_oracle(x, y):
    K = BUMP.curvature(x, y)
    fd = -math.exp(-2 * BUMP.phi(x, y)) * fd_laplacian(BUMP, x, y)
    assert K == pytest.approx(fd, abs=1e-5)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_phi_and_derivatives_are_periodic(x, y):
    m = MetricField(1.5, 0.7, ((1, 2, 0.1, -0.05), (3, -1, 0.02, 0.03)))
    a = np.array(m.phi_derivatives(x, y))
    b = np.array(m.phi_derivatives(x + 1.5, y))
    c = np.array(m.phi_derivatives(x, y - 0.7))
    assert np.max(np.abs(a - b)) < 1e-9 and np.max(np.abs(a - c)) < 1e-9
    assert abs(m.phi(x, y) - m.phi(x + 1.5, y)) < 1e-12


def test_k_max_is_cached_and_bounds_the_grid():
    m = MetricField(1, 1, ((1, 1, 0.05, 0.0), (1, -1, 0.05, 0.0)))
    k = m.k_max
    assert k is m.k_max
    assert k >= np.abs(m.curvature_grid(256)).max()
    assert FLAT.k_max == 0.0
    assert MetricField(1, 1, (), curvature_override=-2.0).k_max == 2.0


def test_override_requires_flat_phi():
    with pytest.raises(TableError, match="curvature_override"):
        MetricField(1, 1, ((1, 0, 0.1, 0.0),), curvature_override=-1.0)


def test_flat_circle_obstacle_curvature_is_minus_inverse_radius():
    w = CircleWall((0.5, 0.5), 0.3)
    for r in np.linspace(0, 2 * math.pi * 0.3, 7, endpoint=False):
        f = wall_frame(w, r, FLAT)
        assert f.kappa == pytest.approx(-1 / 0.3, rel=1e-12)


@pytest.mark.parametrize("metric", [FLAT, BUMP], ids=["flat", "bump"])
def test_wall_parametrization_has_unit_metric_speed(metric):
    w = CircleWall((0.5, 0.5), 0.2)
    L = ArcLength(w, metric).length
    h = 1e-5
    for r in np.linspace(0.01, L - 0.01, 9):
        p1 = np.array(wall_frame(w, r + h, metric).point)
        p0 = np.array(wall_frame(w, r - h, metric).point)
        mid = wall_frame(w, r, metric).point
        speed = math.exp(metric.phi(*mid)) * np.linalg.norm(p1 - p0) / (2 * h)
        assert abs(speed - 1) < 1e-9


@pytest.mark.parametrize("metric", [FLAT, BUMP], ids=["flat", "bump"])
def test_frame_is_orthonormal_and_normal_points_into_billiard(metric):
    table = BilliardTable(metric, (CircleWall((0.5, 0.5), 0.2),))
    w = table.walls[0]
    L = ArcLength(w, metric).length
    for r in np.linspace(0, L, 11, endpoint=False):
        f = wall_frame(w, r, metric)
        x, y = f.point
        assert metric.inner(x, y, f.T, f.T) == pytest.approx(1, abs=1e-12)
        assert metric.inner(x, y, f.N, f.N) == pytest.approx(1, abs=1e-12)
        assert abs(metric.inner(x, y, f.T, f.N)) < 1e-12
        probe = (x + 1e-4 * f.N[0], y + 1e-4 * f.N[1])
        assert w.signed_distance(probe, table.periods) > 0


def test_gauss_bonnet_oracle_for_curved_wall_curvature():
    # boundary term of the disk plus its total curvature must be 2 pi
    w = CircleWall((0.5, 0.5), 0.2)
    al = ArcLength(w, BUMP)
    n = 400
    rs = np.arange(n) * al.length / n
    boundary = -sum(wall_frame(w, r, BUMP).kappa for r in rs) * al.length / n
    xg, wg = np.polynomial.legendre.leggauss(40)
    radii = 0.1 * (xg + 1)
    thetas = np.arange(200) * 2 * math.pi / 200
    area = 0.0
    for rad, wr in zip(radii, wg * 0.1):
        for th in thetas:
            x, y = 0.5 + rad * math.cos(th), 0.5 + rad * math.sin(th)
            area += -fd_laplacian(BUMP, x, y, 1e-4) * rad * wr * (2 * math.pi / 200)
    assert boundary + area == pytest.approx(2 * math.pi, abs=1e-5)


def test_spline_circle_approximates_analytic_curvature():
    pts = [(0.5 + 0.2 * math.cos(a), 0.5 + 0.2 * math.sin(a)) for a in np.linspace(0, 2 * math.pi, 48, endpoint=False)]
    w = SplineWall(tuple(pts))
    L = ArcLength(w, FLAT).length
    assert L == pytest.approx(2 * math.pi * 0.2, rel=1e-4)
    kappas = [wall_frame(w, r, FLAT).kappa for r in np.linspace(0, L, 13, endpoint=False)]
    assert np.allclose(kappas, -5.0, rtol=2e-2)


def test_line_wall_is_geodesic_and_not_dispersing():
    t = BilliardTable(FLAT, (LineWall(0.5, "x", 1.0),))
    f = wall_frame(t.walls[0], 0.3, FLAT)
    assert f.kappa == 0.0
    ok, worst = is_dispersing(t)
    assert not ok and worst == 0.0


def test_is_dispersing_reports_least_negative_curvature(two_disk, four_disk):
    assert is_dispersing(two_disk) == (True, pytest.approx(-1 / 0.3))
    assert is_dispersing(four_disk)[1] == pytest.approx(-1 / 0.35)
    assert is_dispersing(BilliardTable(FLAT, ())) == (True, None)


def test_overlapping_walls_are_rejected():
    with pytest.raises(TableError):
        BilliardTable(FLAT, (CircleWall((0.3, 0.3), 0.2), CircleWall((0.5, 0.3), 0.2)))


def test_disk_overlapping_its_periodic_copy_is_rejected():
    with pytest.raises(TableError):
        BilliardTable(FLAT, (CircleWall((0.5, 0.5), 0.55),))


def test_self_intersecting_spline_is_rejected():
    figure_eight = [(0.5 + 0.3 * math.sin(a), 0.5 + 0.2 * math.sin(2 * a)) for a in np.linspace(0, 2 * math.pi, 40, endpoint=False)]
    with pytest.raises(TableError):
        BilliardTable(FLAT, (SplineWall(tuple(figure_eight)),))


def test_parse_table_round_trip_and_key_diagnostics():
    text = """
name = "t"
[metric]
period_x = 2.0
period_y = 1.0
phi_modes = [[1, 0, 0.1, 0.0]]
[[walls]]
type = "circle"
center = [1.0, 0.5]
radius = 0.2
"""
    t = parse_table(text)
    assert t.name == "t" and t.periods == (2.0, 1.0) and len(t.walls) == 1
    again = table_from_dict(table_to_dict(t))
    assert table_to_dict(again) == table_to_dict(t)
    with pytest.raises(TableError, match="radius"):
        parse_table('[[walls]]\ntype = "circle"\ncenter = [0.5, 0.5]\n')
    with pytest.raises(TableError, match="metric.bogus"):
        parse_table("[metric]\nbogus = 1\n")
    with pytest.raises(TableError, match="type"):
        parse_table('[[walls]]\ntype = "ellipse"\n')
    with pytest.raises(TableError, match="TOML"):
        parse_table("[metric\n")
