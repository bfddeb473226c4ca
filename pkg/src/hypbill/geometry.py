"""Ambient surface, curvature and billiard walls.

The ambient surface is a 2-torus ``[0, period_x) x [0, period_y)`` carrying a
conformal metric ``g = exp(2 phi) * (dx^2 + dy^2)`` where ``phi`` is a finite
Fourier sum.  Walls are closed curves in the chart; the normal ``N`` of a wall
always points toward the billiard interior and the geodesic curvature is
``kappa = g(nabla_T T, N)``, so circular obstacles in the flat metric have
``kappa = -1/R`` (dispersing).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import NamedTuple, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


class TableError(ValueError):
    """Malformed metric, wall or table definition."""


def wrap_delta(d: float, period: float) -> float:
    """Representative of ``d`` modulo ``period`` in ``[-period/2, period/2)``."""
    return d - period * math.floor(d / period + 0.5)


@dataclass(frozen=True)
class MetricField:
    """Conformal metric ``exp(2 phi) * flat`` on a torus chart.

    ``phi_modes`` holds ``(kx, ky, a_cos, a_sin)`` tuples; each contributes
    ``a_cos*cos(w) + a_sin*sin(w)`` with ``w = 2 pi (kx x / period_x + ky y / period_y)``.

    ``curvature_override`` replaces the Gaussian curvature by a constant while
    leaving geodesics unchanged.  It exists for closed-form test harnesses and
    requires a flat ``phi``.
    """

    period_x: float = 1.0
    period_y: float = 1.0
    phi_modes: tuple[tuple[int, int, float, float], ...] = ()
    curvature_override: float | None = None
    kmax_grid: int = 512
    kmax_margin: float = 0.1

    def __post_init__(self):
        if not (self.period_x > 0 and self.period_y > 0):
            raise TableError("metric.period_x and metric.period_y must be positive")
        modes = []
        for mode in self.phi_modes:
            if len(mode) != 4:
                raise TableError(f"metric.phi_modes entry {mode!r} must have 4 items")
            kx, ky, ac, as_ = mode
            if int(kx) != kx or int(ky) != ky:
                raise TableError(f"metric.phi_modes wave numbers must be integers, got {mode!r}")
            modes.append((int(kx), int(ky), float(ac), float(as_)))
        object.__setattr__(self, "phi_modes", tuple(modes))
        # (wx, wy, a, b) with angular wave numbers, skipping constant modes
        waves = tuple(
            (TWO_PI * kx / self.period_x, TWO_PI * ky / self.period_y, ac, as_)
            for kx, ky, ac, as_ in self.phi_modes
            if kx != 0 or ky != 0
        )
        object.__setattr__(self, "_waves", waves)
        object.__setattr__(
            self, "_phi0", sum(ac for kx, ky, ac, _ in self.phi_modes if kx == 0 and ky == 0)
        )
        if self.curvature_override is not None and not self.is_flat:
            raise TableError("metric.curvature_override requires a flat (constant) phi")

    @property
    def periods(self) -> tuple[float, float]:
        return (self.period_x, self.period_y)

    @property
    def is_flat(self) -> bool:
        """True when ``phi`` is constant, i.e. the chart metric is a scaled flat metric."""
        return not self._waves

    @property
    def phi_constant(self) -> float:
        return self._phi0

    def phi(self, x: float, y: float) -> float:
        val = self._phi0
        for wx, wy, a, b in self._waves:
            th = wx * x + wy * y
            val += a * math.cos(th) + b * math.sin(th)
        return val

    def phi_grad(self, x: float, y: float) -> tuple[float, float, float]:
        """``(phi, phi_x, phi_y)`` at a chart point."""
        val, gx, gy = self._phi0, 0.0, 0.0
        for wx, wy, a, b in self._waves:
            th = wx * x + wy * y
            c, s = math.cos(th), math.sin(th)
            val += a * c + b * s
            d = b * c - a * s
            gx += wx * d
            gy += wy * d
        return val, gx, gy

    def phi_derivatives(self, x, y):
        """``(phi, phi_x, phi_y, phi_xx, phi_xy, phi_yy)``; accepts scalars or arrays."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = [np.full(np.broadcast(x, y).shape, self._phi0)] + [
            np.zeros(np.broadcast(x, y).shape) for _ in range(5)
        ]
        for wx, wy, a, b in self._waves:
            th = wx * x + wy * y
            c, s = np.cos(th), np.sin(th)
            f = a * c + b * s
            d = b * c - a * s
            out[0] = out[0] + f
            out[1] = out[1] + wx * d
            out[2] = out[2] + wy * d
            out[3] = out[3] - wx * wx * f
            out[4] = out[4] - wx * wy * f
            out[5] = out[5] - wy * wy * f
        if out[0].ndim == 0:
            return tuple(float(v) for v in out)
        return tuple(out)

    def laplacian_phi(self, x: float, y: float) -> float:
        lap = 0.0
        for wx, wy, a, b in self._waves:
            th = wx * x + wy * y
            lap -= (wx * wx + wy * wy) * (a * math.cos(th) + b * math.sin(th))
        return lap

    def curvature(self, x: float, y: float) -> float:
        if self.curvature_override is not None:
            return self.curvature_override
        if not self._waves:
            return 0.0
        return -math.exp(-2.0 * self.phi(x, y)) * self.laplacian_phi(x, y)

    def curvature_grid(self, n: int) -> np.ndarray:
        """Curvature on an ``n x n`` grid over the fundamental domain (rows are y)."""
        xs = np.arange(n) * (self.period_x / n)
        ys = np.arange(n) * (self.period_y / n)
        X, Y = np.meshgrid(xs, ys)
        if self.curvature_override is not None:
            return np.full(X.shape, float(self.curvature_override))
        phi, _, _, pxx, _, pyy = self.phi_derivatives(X, Y)
        return -np.exp(-2.0 * phi) * (pxx + pyy)

    @cached_property
    def k_max(self) -> float:
        """Estimated ``max |K|`` over the chart, including the safety margin."""
        if self.curvature_override is not None:
            return abs(float(self.curvature_override))
        if not self._waves:
            return 0.0
        grid = self.curvature_grid(self.kmax_grid)
        return float(np.max(np.abs(grid))) * (1.0 + self.kmax_margin)

    def norm(self, x: float, y: float, v: Sequence[float]) -> float:
        """Length of the chart vector ``v`` at ``(x, y)`` in the metric."""
        return math.exp(self.phi(x, y)) * math.hypot(v[0], v[1])

    def inner(self, x: float, y: float, v, w) -> float:
        return math.exp(2.0 * self.phi(x, y)) * (v[0] * w[0] + v[1] * w[1])

    def scaled(self, rho: float) -> "MetricField":
        """The metric ``rho**2 * g`` (curvature scales by ``1/rho**2``)."""
        modes = self.phi_modes + ((0, 0, math.log(rho), 0.0),)
        override = None if self.curvature_override is None else self.curvature_override / rho**2
        return MetricField(
            self.period_x, self.period_y, modes, override, self.kmax_grid, self.kmax_margin
        )


def curvature_at(metric: MetricField, p: Sequence[float]) -> float:
    """Gaussian curvature ``K = -exp(-2 phi) * laplacian(phi)`` at chart point ``p``."""
    return metric.curvature(float(p[0]), float(p[1]))


# --------------------------------------------------------------------------- walls


class Wall:
    """A closed chart curve parametrized by ``s`` in ``[0, 1)``.

    Subclasses provide the chart map and its first two derivatives, the unit
    Euclidean normal pointing into the billiard, and a signed distance that is
    positive on the billiard side.
    """

    obstacle: bool = True

    def point(self, s: float) -> tuple[float, float]:
        raise NotImplementedError

    def d1(self, s: float) -> tuple[float, float]:
        raise NotImplementedError

    def d2(self, s: float) -> tuple[float, float]:
        raise NotImplementedError

    def normal(self, s: float) -> tuple[float, float]:
        raise NotImplementedError

    def signed_distance(self, q: Sequence[float], periods: tuple[float, float]) -> float:
        raise NotImplementedError

    def project(self, q: Sequence[float], periods: tuple[float, float]) -> float:
        """Curve parameter ``s`` of the point nearest to ``q`` (modulo periods)."""
        raise NotImplementedError

    def samples(self, n: int) -> np.ndarray:
        return np.array([self.point(i / n) for i in range(n)])

    def crossed(self, d_before: float, d_after: float, periods) -> bool:
        """Whether a step with these signed distances went through the wall."""
        return d_before > 0.0 and d_after <= 0.0

    @property
    def constant_speed(self) -> bool:
        return False


@dataclass(frozen=True)
class CircleWall(Wall):
    """Circle of ``radius`` about ``center``; an obstacle unless ``obstacle=False``."""

    center: tuple[float, float]
    radius: float
    obstacle: bool = True

    def __post_init__(self):
        if not self.radius > 0:
            raise TableError(f"walls radius must be positive, got {self.radius!r}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    def point(self, s):
        a = TWO_PI * s
        return (self.center[0] + self.radius * math.cos(a), self.center[1] + self.radius * math.sin(a))

    def d1(self, s):
        a = TWO_PI * s
        k = TWO_PI * self.radius
        return (-k * math.sin(a), k * math.cos(a))

    def d2(self, s):
        a = TWO_PI * s
        k = TWO_PI * TWO_PI * self.radius
        return (-k * math.cos(a), -k * math.sin(a))

    def normal(self, s):
        a = TWO_PI * s
        sign = 1.0 if self.obstacle else -1.0
        return (sign * math.cos(a), sign * math.sin(a))

    def signed_distance(self, q, periods):
        dx = wrap_delta(q[0] - self.center[0], periods[0])
        dy = wrap_delta(q[1] - self.center[1], periods[1])
        d = math.hypot(dx, dy) - self.radius
        return d if self.obstacle else -d

    def project(self, q, periods):
        dx = wrap_delta(q[0] - self.center[0], periods[0])
        dy = wrap_delta(q[1] - self.center[1], periods[1])
        return (math.atan2(dy, dx) / TWO_PI) % 1.0

    @property
    def constant_speed(self):
        return True


@dataclass(frozen=True)
class LineWall(Wall):
    """Closed straight wall ``y = offset`` (``axis="x"``) or ``x = offset`` (``axis="y"``).

    It is a geodesic of the flat torus.  In the dynamics it acts as a two-sided
    mirror; ``side`` only fixes the orientation reported by :func:`wall_frame`.
    """

    offset: float
    axis: str = "x"
    period: float = 1.0
    side: int = 1
    obstacle: bool = False

    def __post_init__(self):
        if self.axis not in ("x", "y"):
            raise TableError(f"walls axis must be 'x' or 'y', got {self.axis!r}")
        if self.side not in (1, -1):
            raise TableError("walls side must be +1 or -1")

    def point(self, s):
        t = s * self.period
        return (t, self.offset) if self.axis == "x" else (self.offset, t)

    def d1(self, s):
        return (self.period, 0.0) if self.axis == "x" else (0.0, self.period)

    def d2(self, s):
        return (0.0, 0.0)

    def normal(self, s):
        return (0.0, float(self.side)) if self.axis == "x" else (float(self.side), 0.0)

    def _coord(self, q):
        return q[1] if self.axis == "x" else q[0]

    def signed_distance(self, q, periods):
        per = periods[1] if self.axis == "x" else periods[0]
        return self.side * wrap_delta(self._coord(q) - self.offset, per)

    def crossed(self, d_before, d_after, periods):
        per = periods[1] if self.axis == "x" else periods[0]
        if abs(d_before) > per / 4 or abs(d_after) > per / 4:
            return False
        if d_before == 0.0:
            return False
        return d_after == 0.0 or (d_before > 0.0) != (d_after > 0.0)

    def project(self, q, periods):
        c = q[0] if self.axis == "x" else q[1]
        return (c / self.period) % 1.0

    @property
    def constant_speed(self):
        return True


@dataclass(frozen=True)
class SplineWall(Wall):
    """Periodic cubic spline through ``points`` (chord-length parametrized)."""

    points: tuple[tuple[float, float], ...]
    obstacle: bool = True
    _spline: object = field(default=None, compare=False, hash=False, repr=False)

    def __post_init__(self):
        pts = tuple((float(p[0]), float(p[1])) for p in self.points)
        if len(pts) < 4:
            raise TableError("walls spline needs at least 4 points")
        object.__setattr__(self, "points", pts)
        from scipy.interpolate import CubicSpline

        arr = np.array(pts + (pts[0],))
        chord = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(arr, axis=0).T))])
        if np.any(np.diff(chord) <= 0):
            raise TableError("walls spline has repeated consecutive points")
        spline = CubicSpline(chord / chord[-1], arr, bc_type="periodic")
        object.__setattr__(self, "_spline", spline)
        area = 0.5 * np.sum(arr[:-1, 0] * arr[1:, 1] - arr[1:, 0] * arr[:-1, 1])
        object.__setattr__(self, "_ccw", bool(area > 0))
        dense = spline(np.linspace(0.0, 1.0, 2049)[:-1])
        object.__setattr__(self, "_dense", dense)

    def point(self, s):
        p = self._spline(s % 1.0)
        return (float(p[0]), float(p[1]))

    def d1(self, s):
        p = self._spline(s % 1.0, 1)
        return (float(p[0]), float(p[1]))

    def d2(self, s):
        p = self._spline(s % 1.0, 2)
        return (float(p[0]), float(p[1]))

    def normal(self, s):
        tx, ty = self.d1(s)
        n = math.hypot(tx, ty)
        # outward normal of a counter-clockwise curve is the tangent turned clockwise
        sign = 1.0 if (self._ccw == self.obstacle) else -1.0
        return (sign * ty / n, -sign * tx / n)

    def _nearest(self, q, periods):
        best = None
        cx, cy = self._dense.mean(axis=0)
        qx = cx + wrap_delta(q[0] - cx, periods[0])
        qy = cy + wrap_delta(q[1] - cy, periods[1])
        d2 = (self._dense[:, 0] - qx) ** 2 + (self._dense[:, 1] - qy) ** 2
        i = int(np.argmin(d2))
        s = i / len(self._dense)
        # Newton on the squared distance
        for _ in range(8):
            px, py = self.point(s)
            tx, ty = self.d1(s)
            ax, ay = self.d2(s)
            rx, ry = px - qx, py - qy
            g = rx * tx + ry * ty
            hess = tx * tx + ty * ty + rx * ax + ry * ay
            if hess <= 0:
                break
            step = g / hess
            s -= step
            if abs(step) < 1e-14:
                break
        best = s % 1.0
        return best, (qx, qy)

    def signed_distance(self, q, periods):
        s, (qx, qy) = self._nearest(q, periods)
        px, py = self.point(s)
        nx, ny = self.normal(s)
        return (qx - px) * nx + (qy - py) * ny

    def project(self, q, periods):
        return self._nearest(q, periods)[0]

    def samples(self, n):
        return self._spline(np.arange(n) / n)


# --------------------------------------------------------------------------- arc length

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


class ArcLength:
    """Metric arc length along a wall and its inverse."""

    def __init__(self, wall: Wall, metric: MetricField, panels: int = 256):
        self.wall = wall
        self.metric = metric
        self.exact = wall.constant_speed and metric.is_flat
        if self.exact:
            self.scale = math.exp(metric.phi_constant) * math.hypot(*wall.d1(0.0))
            self.length = self.scale
            return
        edges = np.linspace(0.0, 1.0, panels + 1)
        self.edges = edges
        cum = [0.0]
        for a, b in zip(edges[:-1], edges[1:]):
            cum.append(cum[-1] + self._quad(a, b))
        self.cum = np.array(cum)
        self.length = float(self.cum[-1])

    def speed(self, s: float) -> float:
        px, py = self.wall.point(s)
        return math.exp(self.metric.phi(px, py)) * math.hypot(*self.wall.d1(s))

    def _quad(self, a: float, b: float) -> float:
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        return half * sum(w * self.speed(mid + half * x) for x, w in zip(_GL_X, _GL_W))

    def r_of_s(self, s: float) -> float:
        s = s % 1.0
        if self.exact:
            return self.scale * s
        i = min(int(np.searchsorted(self.edges, s, side="right")) - 1, len(self.edges) - 2)
        return float(self.cum[i]) + self._quad(float(self.edges[i]), s)

    def s_of_r(self, r: float) -> float:
        r = r % self.length
        if self.exact:
            return r / self.scale
        i = min(int(np.searchsorted(self.cum, r, side="right")) - 1, len(self.edges) - 2)
        a, b = float(self.edges[i]), float(self.edges[i + 1])
        s = a + (b - a) * (r - self.cum[i]) / (self.cum[i + 1] - self.cum[i])
        for _ in range(20):
            err = (float(self.cum[i]) + self._quad(a, s)) - r
            step = err / self.speed(s)
            s -= step
            if abs(step) < 1e-15:
                break
        return s


@lru_cache(maxsize=256)
def arc_length(wall: Wall, metric: MetricField) -> ArcLength:
    return ArcLength(wall, metric)


class WallFrame(NamedTuple):
    point: tuple[float, float]
    T: tuple[float, float]
    N: tuple[float, float]
    kappa: float
    s: float


def frame_at_parameter(wall: Wall, s: float, metric: MetricField) -> WallFrame:
    """Wall frame at curve parameter ``s`` (not arc length)."""
    px, py = wall.point(s)
    d1x, d1y = wall.d1(s)
    d2x, d2y = wall.d2(s)
    phi, gx, gy = metric.phi_grad(px, py)
    ef = math.exp(-phi)
    sp = math.hypot(d1x, d1y)
    nx, ny = wall.normal(s)
    k_flat = (d2x * nx + d2y * ny) / (sp * sp)
    kappa = ef * (k_flat - (gx * nx + gy * ny))
    return WallFrame((px, py), (ef * d1x / sp, ef * d1y / sp), (ef * nx, ef * ny), kappa, s)


def wall_frame(wall: Wall, r: float, metric: MetricField) -> WallFrame:
    """Point, unit tangent, unit inward normal (chart components) and geodesic curvature.

    ``r`` is metric arc length measured from the curve's base point.  ``T`` and
    ``N`` are orthonormal in the metric.  The curvature uses the conformal
    change rule ``kappa = exp(-phi) * (kappa_flat - d(phi)/dn)``.
    """
    s = arc_length(wall, metric).s_of_r(r)
    return frame_at_parameter(wall, s, metric)


# --------------------------------------------------------------------------- tables


def _wall_geometry(wall: Wall, periods, n: int = 1024):
    from shapely.geometry import LinearRing, LineString

    if isinstance(wall, LineWall):
        if wall.axis == "x":
            return LineString([(-periods[0], wall.offset), (2 * periods[0], wall.offset)])
        return LineString([(wall.offset, -periods[1]), (wall.offset, 2 * periods[1])])
    return LinearRing(wall.samples(n))


@dataclass(frozen=True)
class BilliardTable:
    metric: MetricField
    walls: tuple[Wall, ...] = ()
    name: str = "table"

    def __post_init__(self):
        object.__setattr__(self, "walls", tuple(self.walls))
        self.validate()

    @property
    def periods(self) -> tuple[float, float]:
        return self.metric.periods

    def validate(self, probes: int = 64) -> None:
        from shapely import affinity

        periods = self.periods
        geoms = []
        for i, w in enumerate(self.walls):
            if isinstance(w, CircleWall) and 2 * w.radius >= min(periods):
                raise TableError(f"walls[{i}] circle overlaps its own periodic copy")
            g = _wall_geometry(w, periods)
            if not g.is_simple:
                raise TableError(f"walls[{i}] intersects itself")
            geoms.append(g)
        shifts = [(a * periods[0], b * periods[1]) for a in (-1, 0, 1) for b in (-1, 0, 1)]
        for i in range(len(self.walls)):
            for j in range(i + 1, len(self.walls)):
                wi, wj = self.walls[i], self.walls[j]
                for dx, dy in shifts:
                    if isinstance(wi, CircleWall) and isinstance(wj, CircleWall):
                        dist = math.hypot(
                            wi.center[0] - wj.center[0] - dx, wi.center[1] - wj.center[1] - dy
                        )
                        # also rejects nested circles
                        gap = dist - wi.radius - wj.radius
                    else:
                        gap = geoms[i].distance(affinity.translate(geoms[j], dx, dy))
                    if gap <= 1e-6:
                        raise TableError(f"walls[{i}] and walls[{j}] intersect or touch")
        rng = np.random.default_rng(0)
        pts = rng.random((probes, 2)) * np.array(periods)
        if self.walls and not any(self.contains(p) for p in pts):
            raise TableError("billiard interior is empty")

    def signed_distances(self, q) -> list[float]:
        return [w.signed_distance(q, self.periods) for w in self.walls]

    def contains(self, q, tol: float = 0.0) -> bool:
        """Whether ``q`` lies in the closed billiard domain (up to ``tol``)."""
        return all(d >= -tol for d in self.signed_distances(q))

    @property
    def is_flat(self) -> bool:
        return self.metric.is_flat


def is_dispersing(table: BilliardTable, samples: int = 256) -> tuple[bool, float | None]:
    """``(all sampled kappa < 0, worst sampled kappa)``; ``None`` when there are no walls."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if not table.walls:
        return True, None
    worst = -math.inf
    for wall in table.walls:
        for i in range(samples):
            worst = max(worst, frame_at_parameter(wall, i / samples, table.metric).kappa)
    return worst < 0.0, worst


# --------------------------------------------------------------------------- table files


def table_from_dict(data: dict, name: str | None = None) -> BilliardTable:
    """Build a table from the parsed table-file mapping."""
    if not isinstance(data, dict):
        raise TableError("table definition must be a mapping")
    metric_d = data.get("metric", {})
    if not isinstance(metric_d, dict):
        raise TableError("metric must be a table of keys")
    unknown = set(metric_d) - {"period_x", "period_y", "phi_modes", "curvature_override", "kmax_grid", "kmax_margin"}
    if unknown:
        raise TableError(f"unknown key metric.{sorted(unknown)[0]}")
    try:
        metric = MetricField(
            period_x=float(metric_d.get("period_x", 1.0)),
            period_y=float(metric_d.get("period_y", 1.0)),
            phi_modes=tuple(tuple(m) for m in metric_d.get("phi_modes", ())),
            curvature_override=(
                None if metric_d.get("curvature_override") is None else float(metric_d["curvature_override"])
            ),
            kmax_grid=int(metric_d.get("kmax_grid", 512)),
            kmax_margin=float(metric_d.get("kmax_margin", 0.1)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, TableError):
            raise
        raise TableError(f"metric: {exc}") from exc
    walls = []
    for i, w in enumerate(data.get("walls", [])):
        kind = w.get("type")
        try:
            if kind == "circle":
                walls.append(CircleWall(tuple(w["center"]), float(w["radius"]), bool(w.get("obstacle", True))))
            elif kind == "spline":
                walls.append(SplineWall(tuple(tuple(p) for p in w["points"]), bool(w.get("obstacle", True))))
            elif kind == "line":
                axis = w.get("axis", "x")
                period = metric.period_x if axis == "x" else metric.period_y
                walls.append(LineWall(float(w["offset"]), axis, period, int(w.get("side", 1))))
            else:
                raise TableError(f"walls[{i}].type must be circle, spline or line, got {kind!r}")
        except KeyError as exc:
            raise TableError(f"walls[{i}] is missing key {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, TableError):
                raise TableError(f"walls[{i}]: {exc}") from exc
            raise TableError(f"walls[{i}]: {exc}") from exc
    return BilliardTable(metric, tuple(walls), str(data.get("name", name or "table")))


def table_to_dict(table: BilliardTable) -> dict:
    m = table.metric
    metric = {"period_x": m.period_x, "period_y": m.period_y, "phi_modes": [list(t) for t in m.phi_modes]}
    if m.curvature_override is not None:
        metric["curvature_override"] = m.curvature_override
    walls = []
    for w in table.walls:
        if isinstance(w, CircleWall):
            walls.append({"type": "circle", "center": list(w.center), "radius": w.radius, "obstacle": w.obstacle})
        elif isinstance(w, SplineWall):
            walls.append({"type": "spline", "points": [list(p) for p in w.points], "obstacle": w.obstacle})
        elif isinstance(w, LineWall):
            walls.append({"type": "line", "offset": w.offset, "axis": w.axis, "side": w.side})
    return {"name": table.name, "metric": metric, "walls": walls}


def parse_table(text: str, name: str | None = None) -> BilliardTable:
    """Parse a TOML table definition."""
    try:
        import tomllib
    except ImportError:  # Python < 3.11
        import tomli as tomllib
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise TableError(f"table file is not valid TOML: {exc}") from exc
    return table_from_dict(data, name)
