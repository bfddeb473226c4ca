"""Billiard flow on a (conformal) torus.

Free flight follows geodesics of the chart metric.  When ``phi`` is constant
the flight is a straight line and collisions are found in closed form; for
curved metrics the geodesic ODE is integrated with fixed-step RK4 and
collisions are bracketed by sign changes of the wall signed distance, then
refined by bisection.

The closed-form flat kernel is written over plain scalars so it also runs on
:class:`decimal.Decimal` values; ``flow(..., precision=digits)`` uses that to
follow chaotic trajectories with more digits than a double carries.
"""

from __future__ import annotations

import decimal
import math
from dataclasses import dataclass, field, replace
from decimal import Decimal
from typing import Callable, Iterator, NamedTuple

import numpy as np

from .geometry import (
    BilliardTable,
    CircleWall,
    LineWall,
    MetricField,
    arc_length,
    frame_at_parameter,
)

DEFAULT_STEP = 1e-3
GRAZING_TOL = 1e-4
BISECTION_TOL = 1e-11
PENETRATION_LIMIT = 1e-6


class GrazingCollision(Exception):
    """Raised when the trajectory meets a wall with ``sin(theta)`` below tolerance."""

    def __init__(self, event: "CollisionEvent"):
        super().__init__(f"grazing collision at t={event.time:.12g} (sin theta={event.sin_theta:.3g})")
        self.event = event


class StepUnderflow(ValueError):
    pass


def _negate(v):
    return v.copy_negate() if isinstance(v, Decimal) else -v


@dataclass(frozen=True)
class PhasePoint:
    position: tuple
    velocity: tuple

    @classmethod
    def from_angle(cls, metric: MetricField, x: float, y: float, angle: float) -> "PhasePoint":
        """Unit-speed state at ``(x, y)`` heading at chart angle ``angle``."""
        s = math.exp(-metric.phi(x, y))
        return cls((float(x), float(y)), (s * math.cos(angle), s * math.sin(angle)))

    def reversed(self) -> "PhasePoint":
        # copy_negate is exact; unary minus would round Decimals to the ambient context
        return PhasePoint(self.position, tuple(_negate(v) for v in self.velocity))

    def speed(self, metric: MetricField) -> float:
        x, y = (float(c) for c in self.position)
        return metric.norm(x, y, [float(c) for c in self.velocity])

    def as_float(self) -> "PhasePoint":
        return PhasePoint(tuple(float(c) for c in self.position), tuple(float(c) for c in self.velocity))


@dataclass(frozen=True)
class CollisionEvent:
    time: float
    wall_index: int
    r: float
    theta: float
    kappa: float
    position: tuple
    v_in: tuple
    v_out: tuple | None
    normal: tuple  # metric-unit normal (chart components) on the incoming side

    @property
    def sin_theta(self) -> float:
        return math.sin(self.theta)


class Segment(NamedTuple):
    """Collision-free piece of a trajectory: flight from ``position`` over ``[t0, t1]``."""

    t0: float
    t1: float
    position: tuple
    velocity: tuple

    @property
    def duration(self) -> float:
        return self.t1 - self.t0


SAMPLE_COLUMNS = ("t", "x", "y", "vx", "vy", "event_flag")


@dataclass
class TrajectoryRecord:
    initial: PhasePoint
    duration: float
    events: list[CollisionEvent]
    termination: str  # time-limit | grazing | escaped-domain-error
    t_end: float
    final: PhasePoint
    samples: np.ndarray | None = None
    grazing: CollisionEvent | None = None
    max_correction: float = 0.0
    step: float = DEFAULT_STEP

    def segments(self) -> Iterator[Segment]:
        t0, st = 0.0, self.initial.as_float()
        for ev in self.events:
            yield Segment(t0, ev.time, st.position, st.velocity)
            t0, st = ev.time, PhasePoint(ev.position, ev.v_out)
        yield Segment(t0, self.t_end, st.position, st.velocity)

    def free_paths(self) -> np.ndarray:
        """Times between consecutive collisions."""
        return np.diff([ev.time for ev in self.events])


# --------------------------------------------------------------------------- integrator


def _accel(metric: MetricField, x, y, vx, vy):
    _, gx, gy = metric.phi_grad(x, y)
    dot = gx * vx + gy * vy
    v2 = vx * vx + vy * vy
    return (v2 * gx - 2.0 * dot * vx, v2 * gy - 2.0 * dot * vy)


def rk4_step(metric: MetricField, s, h, extra=None, extra_rhs=None):
    """One RK4 step of the geodesic ODE ``x'' = |x'|^2 grad(phi) - 2 (grad(phi).x') x'``.

    ``extra`` is an optional tuple of auxiliary variables evolving by
    ``extra_rhs(K, extra)`` where ``K`` is the curvature at the stage point;
    the geodesic part is computed identically whether or not it is present.
    """
    x, y, vx, vy = s
    ax1, ay1 = _accel(metric, x, y, vx, vy)
    x2, y2 = x + 0.5 * h * vx, y + 0.5 * h * vy
    vx2, vy2 = vx + 0.5 * h * ax1, vy + 0.5 * h * ay1
    ax2, ay2 = _accel(metric, x2, y2, vx2, vy2)
    x3, y3 = x + 0.5 * h * vx2, y + 0.5 * h * vy2
    vx3, vy3 = vx + 0.5 * h * ax2, vy + 0.5 * h * ay2
    ax3, ay3 = _accel(metric, x3, y3, vx3, vy3)
    x4, y4 = x + h * vx3, y + h * vy3
    vx4, vy4 = vx + h * ax3, vy + h * ay3
    ax4, ay4 = _accel(metric, x4, y4, vx4, vy4)
    h6 = h / 6.0
    out = (
        x + h6 * (vx + 2 * vx2 + 2 * vx3 + vx4),
        y + h6 * (vy + 2 * vy2 + 2 * vy3 + vy4),
        vx + h6 * (ax1 + 2 * ax2 + 2 * ax3 + ax4),
        vy + h6 * (ay1 + 2 * ay2 + 2 * ay3 + ay4),
    )
    if extra is None:
        return out, None
    K1 = metric.curvature(x, y)
    K2 = metric.curvature(x2, y2)
    K3 = metric.curvature(x3, y3)
    K4 = metric.curvature(x4, y4)
    e = extra
    k1 = extra_rhs(K1, e)
    k2 = extra_rhs(K2, tuple(a + 0.5 * h * b for a, b in zip(e, k1)))
    k3 = extra_rhs(K3, tuple(a + 0.5 * h * b for a, b in zip(e, k2)))
    k4 = extra_rhs(K4, tuple(a + h * b for a, b in zip(e, k3)))
    e_out = tuple(a + h6 * (b + 2 * c + 2 * d + f) for a, b, c, d, f in zip(e, k1, k2, k3, k4))
    return out, e_out


def renormalize(metric: MetricField, s):
    """Project the velocity back to the metric unit circle; returns (state, correction)."""
    x, y, vx, vy = s
    speed = math.exp(metric.phi(x, y)) * math.hypot(vx, vy)
    return (x, y, vx / speed, vy / speed), abs(speed - 1.0)


def step_sizes(duration: float, h: float) -> list[float]:
    """Fixed steps of ``h`` followed by one shorter remainder step."""
    if h < 1e-12:
        raise StepUnderflow(f"integrator step {h!r} below 1e-12")
    n = int(math.floor(duration / h + 1e-9))
    steps = [h] * n
    rem = duration - n * h
    if rem > 1e-14:
        steps.append(rem)
    elif steps and rem < 0:
        steps[-1] += rem
    return steps


def _wrap(v: float, period: float) -> float:
    return v - period * math.floor(v / period)


def geodesic_step(
    metric: MetricField, state: PhasePoint, dt: float, h: float = DEFAULT_STEP
) -> tuple[PhasePoint, float]:
    """Advance free flight by ``dt``; returns the new state and the largest speed correction.

    Flat metrics advance exactly.  Positions are reduced into the fundamental domain.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    (x, y), (vx, vy) = state.as_float().position, state.as_float().velocity
    Lx, Ly = metric.periods
    if metric.is_flat:
        return PhasePoint((_wrap(x + dt * vx, Lx), _wrap(y + dt * vy, Ly)), (vx, vy)), 0.0
    s = (x, y, vx, vy)
    worst = 0.0
    for hh in step_sizes(dt, h):
        s, _ = rk4_step(metric, s, hh)
        s, corr = renormalize(metric, s)
        worst = max(worst, corr)
    return PhasePoint((_wrap(s[0], Lx), _wrap(s[1], Ly)), (s[2], s[3])), worst


def reflect(metric: MetricField, point, velocity, N) -> tuple[float, float]:
    """Mirror law ``v+ = v- - 2 g(v-, N) N`` for a metric-unit normal ``N``."""
    e2 = math.exp(2.0 * metric.phi(float(point[0]), float(point[1])))
    vn = e2 * (velocity[0] * N[0] + velocity[1] * N[1])
    return (velocity[0] - 2.0 * vn * N[0], velocity[1] - 2.0 * vn * N[1])


# --------------------------------------------------------------------------- flat kernel


def _to_decimal(v):
    return v if isinstance(v, Decimal) else Decimal(v)


def _sqrt(v):
    return v.sqrt() if isinstance(v, Decimal) else math.sqrt(v)


def _floor(v):
    if isinstance(v, Decimal):
        return v.to_integral_value(rounding=decimal.ROUND_FLOOR)
    return math.floor(v)


class _FlatKernel:
    """Closed-form straight-line billiard on a flat torus, generic over the scalar type."""

    def __init__(self, table: BilliardTable, num: Callable = float):
        self.num = num
        Lx, Ly = table.periods
        self.L = (num(Lx), num(Ly))
        self.circles = []
        self.lines = []
        for i, w in enumerate(table.walls):
            if isinstance(w, CircleWall):
                cx = num(w.center[0]) - self.L[0] * _floor(num(w.center[0]) / self.L[0])
                cy = num(w.center[1]) - self.L[1] * _floor(num(w.center[1]) / self.L[1])
                centers = [
                    (cx + a * self.L[0], cy + b * self.L[1]) for a in (-1, 0, 1) for b in (-1, 0, 1)
                ]
                self.circles.append((i, centers, num(w.radius), w.obstacle))
            elif isinstance(w, LineWall):
                self.lines.append((i, w.axis, num(w.offset)))
            else:
                raise ValueError("flat kernel supports circle and line walls only")
        self.chunk = num(0.5) * min(self.L)
        self.zero = num(0)

    def wrap(self, x, y):
        Lx, Ly = self.L
        return x - Lx * _floor(x / Lx), y - Ly * _floor(y / Ly)

    def first_hit(self, x, y, vx, vy, horizon):
        """Earliest wall contact within ``horizon`` from ``(x, y)`` (in the domain).

        Returns ``(t, wall_index, normal)`` with the Euclidean unit normal
        pointing back toward the incoming side, or ``None``.
        """
        num = self.num
        v2 = vx * vx + vy * vy
        speed = _sqrt(v2)
        chunk_t = self.chunk / speed
        elapsed = self.zero
        while elapsed < horizon:
            tc = min(chunk_t, horizon - elapsed)
            best = None
            reach = speed * tc
            for idx, centers, R, obstacle in self.circles:
                lim = R + reach
                for cx, cy in centers:
                    dx, dy = x - cx, y - cy
                    if abs(dx) > lim or abs(dy) > lim:
                        continue
                    b = dx * vx + dy * vy
                    c = dx * dx + dy * dy - R * R
                    if obstacle:
                        if b >= 0:
                            continue
                        disc = b * b - v2 * c
                        if disc < 0:
                            if disc < -num(1e-12) * v2 * R * R:
                                continue
                            t = -b / v2
                        else:
                            t = c / (-b + _sqrt(disc))
                    else:
                        disc = b * b - v2 * c
                        t = (-b + _sqrt(disc)) / v2 if disc > 0 else self.zero
                    if t <= 0 or t > tc:
                        continue
                    if best is None or t < best[0]:
                        px, py = dx + t * vx, dy + t * vy
                        nrm = _sqrt(px * px + py * py)
                        sgn = 1 if obstacle else -1
                        best = (t, idx, (sgn * px / nrm, sgn * py / nrm))
            for idx, axis, off in self.lines:
                if axis == "x":
                    pos, vel, per = y, vy, self.L[1]
                else:
                    pos, vel, per = x, vx, self.L[0]
                if vel == 0:
                    continue
                gap = (off - pos) if vel > 0 else (pos - off)
                gap = gap - per * _floor(gap / per)
                if gap < num(1e-12) * per:
                    gap += per
                t = gap / abs(vel)
                if t <= tc and (best is None or t < best[0]):
                    sgn = -1 if vel > 0 else 1
                    nrm = (self.zero, num(sgn)) if axis == "x" else (num(sgn), self.zero)
                    best = (t, idx, nrm)
            if best is not None:
                t, idx, nrm = best
                return elapsed + t, idx, nrm, x + t * vx, y + t * vy
            x, y = self.wrap(x + tc * vx, y + tc * vy)
            elapsed += tc
        return None


# --------------------------------------------------------------------------- collisions


def _make_event(table: BilliardTable, t, idx, point, v_in, n_eucl, reflect_it: bool):
    """Collision record at a chart point given the Euclidean unit normal on the incoming side."""
    metric = table.metric
    wall = table.walls[idx]
    fp = (float(point[0]), float(point[1]))
    periods = table.periods
    s = wall.project(fp, periods)
    frame = frame_at_parameter(wall, s, metric)
    r = arc_length(wall, metric).r_of_s(s)
    vin_f = (float(v_in[0]), float(v_in[1]))
    phi = metric.phi(*fp)
    speed_e = math.hypot(*vin_f)
    sin_t = abs(vin_f[0] * float(n_eucl[0]) + vin_f[1] * float(n_eucl[1])) / speed_e
    theta = math.asin(min(1.0, sin_t))
    ef = math.exp(-phi)
    N = (ef * float(n_eucl[0]), ef * float(n_eucl[1]))
    # the frame's curvature is measured against the inward normal of the wall;
    # for two-sided walls flip it when hit from the other side
    kappa = frame.kappa
    fn = frame.N
    if fn[0] * N[0] + fn[1] * N[1] < 0:
        kappa = -kappa
    v_out = None
    if reflect_it:
        ne = (float(n_eucl[0]), float(n_eucl[1]))
        vn = vin_f[0] * ne[0] + vin_f[1] * ne[1]
        v_out = (vin_f[0] - 2 * vn * ne[0], vin_f[1] - 2 * vn * ne[1])
    return CollisionEvent(float(t), idx, float(r), theta, kappa, fp, vin_f, v_out, N)


def _bisect_crossing(metric, s0, h, wall, periods, d0):
    """Smallest sub-step in ``(0, h]`` where ``wall`` is crossed, to BISECTION_TOL."""
    lo, hi = 0.0, h
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        sm, _ = rk4_step(metric, s0, mid)
        sm, _ = renormalize(metric, sm)
        if wall.crossed(d0, wall.signed_distance(sm[:2], periods), periods):
            hi = mid
        else:
            lo = mid
    s1, _ = rk4_step(metric, s0, hi)
    s1, _ = renormalize(metric, s1)
    return hi, s1


class _Advance(NamedTuple):
    hit: tuple | None  # (t, wall_index, point, velocity, euclidean normal)
    state: tuple
    elapsed: float
    max_correction: float
    penetration: float


def _advance_curved(table, s, t_max, h, sampler=None, t_offset=0.0):
    metric = table.metric
    periods = table.periods
    walls = table.walls
    d_prev = [w.signed_distance(s[:2], periods) for w in walls]
    elapsed = 0.0
    worst = 0.0
    deepest = 0.0
    for hh in step_sizes(t_max, h):
        s_new, _ = rk4_step(metric, s, hh)
        s_new, corr = renormalize(metric, s_new)
        worst = max(worst, corr)
        d_new = [w.signed_distance(s_new[:2], periods) for w in walls]
        hit = None
        for i, w in enumerate(walls):
            if w.crossed(d_prev[i], d_new[i], periods):
                dt, s_hit = _bisect_crossing(metric, s, hh, w, periods, d_prev[i])
                if hit is None or dt < hit[0]:
                    hit = (dt, i, s_hit)
        if sampler is not None:
            limit = hit[0] if hit is not None else hh
            sampler(metric, s, t_offset + elapsed, limit)
        if hit is not None:
            dt, i, s_hit = hit
            w = walls[i]
            q = s_hit[:2]
            sw = w.project(q, periods)
            nx, ny = w.normal(sw)
            if isinstance(w, LineWall) and d_prev[i] < 0:
                nx, ny = -nx, -ny
            dep = -min(0.0, w.signed_distance(q, periods)) if not isinstance(w, LineWall) else 0.0
            deepest = max(deepest, dep)
            return _Advance((elapsed + dt, i, q, s_hit[2:], (nx, ny)), s_hit, elapsed + dt, worst, deepest)
        for i, w in enumerate(walls):
            if not isinstance(w, LineWall):
                deepest = max(deepest, -min(0.0, d_new[i]))
        s = (_wrap(s_new[0], periods[0]), _wrap(s_new[1], periods[1]), s_new[2], s_new[3])
        d_prev = d_new
        elapsed += hh
    return _Advance(None, s, t_max, worst, deepest)


def next_collision(
    table: BilliardTable,
    state: PhasePoint,
    t_max: float,
    *,
    h: float = DEFAULT_STEP,
    grazing_tol: float = GRAZING_TOL,
) -> CollisionEvent | None:
    """First wall contact within ``t_max`` (times measured from ``state``), or ``None``.

    Raises :class:`GrazingCollision` when ``sin(theta) < grazing_tol``.
    """
    st = state.as_float()
    if table.is_flat:
        hit = _FlatKernel(table).first_hit(*st.position, *st.velocity, t_max)
        if hit is None:
            return None
        t, idx, n_e, px, py = hit
        point, v_in = (px, py), st.velocity
    else:
        adv = _advance_curved(table, st.position + st.velocity, t_max, h)
        if adv.hit is None:
            return None
        t, idx, point, v_in, n_e = adv.hit
    ev = _make_event(table, t, idx, point, v_in, n_e, reflect_it=True)
    if ev.sin_theta < grazing_tol:
        raise GrazingCollision(replace(ev, v_out=None))
    return ev


# --------------------------------------------------------------------------- flow


class _Sampler:
    """Collects fixed-stride samples of a flight."""

    def __init__(self, stride: float):
        self.stride = stride
        self.rows: list[tuple] = []
        self.next_t = 0.0

    def flat(self, t0, t1, x, y, vx, vy, L):
        while self.next_t <= t1 + 1e-15:
            dt = self.next_t - t0
            self.rows.append(
                (self.next_t, _wrap(x + dt * vx, L[0]), _wrap(y + dt * vy, L[1]), vx, vy, 0)
            )
            self.next_t = self._advance()

    def _advance(self):
        k = round(self.next_t / self.stride) + 1
        return k * self.stride

    def curved(self, metric, s0, t0, limit):
        L = metric.periods
        while self.next_t <= t0 + limit + 1e-15:
            dt = self.next_t - t0
            if dt <= 1e-15:
                s = s0
            else:
                s, _ = rk4_step(metric, s0, dt)
                s, _ = renormalize(metric, s)
            self.rows.append((self.next_t, _wrap(s[0], L[0]), _wrap(s[1], L[1]), s[2], s[3], 0))
            self.next_t = self._advance()

    def finish(self, t_end: float, final: "PhasePoint"):
        """Append the end state unless a sample already sits there."""
        if not self.rows or self.rows[-1][0] < t_end - 1e-12:
            x, y = (float(v) for v in final.position)
            vx, vy = (float(v) for v in final.velocity)
            self.rows.append((t_end, x, y, vx, vy, 0))

    def event(self, ev: CollisionEvent, L):
        v = ev.v_out if ev.v_out is not None else ev.v_in
        self.rows.append(
            (ev.time, _wrap(float(ev.position[0]), L[0]), _wrap(float(ev.position[1]), L[1]),
             float(v[0]), float(v[1]), 1)
        )


def flow(
    table: BilliardTable,
    state: PhasePoint,
    duration: float,
    *,
    h: float = DEFAULT_STEP,
    stride: float | None = None,
    grazing_tol: float = GRAZING_TOL,
    precision: int | None = None,
) -> TrajectoryRecord:
    """Billiard flow of ``state`` over ``[0, duration]``.

    ``stride`` enables dense samples.  ``precision`` (decimal digits) runs the
    flat closed-form kernel in :mod:`decimal` arithmetic; ``record.final`` then
    holds ``Decimal`` coordinates so the run can be continued without rounding.
    """
    if not duration > 0:
        raise ValueError("duration must be positive")
    if precision is not None and not table.is_flat:
        raise ValueError("extended precision is only available for flat tables")
    sampler = _Sampler(stride) if stride else None
    L = table.periods
    events: list[CollisionEvent] = []
    termination = "time-limit"
    grazing = None
    worst_corr = 0.0
    if table.is_flat:
        ctx = decimal.localcontext()
        with ctx as c:
            if precision is not None:
                c.prec = precision
                num = _to_decimal
            else:
                num = float
            kernel = _FlatKernel(table, num)
            x, y = kernel.wrap(*(num(v) for v in state.position))
            vx, vy = (num(v) for v in state.velocity)
            T = num(duration)
            t = num(0)
            while True:
                hit = kernel.first_hit(x, y, vx, vy, T - t)
                if sampler is not None:
                    t1 = float(T) if hit is None else float(t + hit[0])
                    sampler.flat(float(t), t1, float(x), float(y), float(vx), float(vy), L)
                if hit is None:
                    x, y = kernel.wrap(x + (T - t) * vx, y + (T - t) * vy)
                    t = T
                    break
                dt, idx, n_e, px, py = hit
                t = t + dt
                ev = _make_event(table, t, idx, (px, py), (vx, vy), n_e, reflect_it=True)
                if ev.sin_theta < grazing_tol:
                    grazing = replace(ev, v_out=None)
                    termination = "grazing"
                    x, y = kernel.wrap(px, py)
                    break
                events.append(ev)
                if sampler is not None:
                    sampler.event(ev, L)
                x, y = kernel.wrap(px, py)
                vn = vx * n_e[0] + vy * n_e[1]
                vx, vy = vx - 2 * vn * n_e[0], vy - 2 * vn * n_e[1]
            final = PhasePoint((x, y), (vx, vy))
            t_end = float(t)
    else:
        s = state.as_float().position + state.as_float().velocity
        s = (_wrap(s[0], L[0]), _wrap(s[1], L[1]), s[2], s[3])
        t = 0.0
        while t < duration - 1e-15:
            adv = _advance_curved(
                table, s, duration - t, h,
                sampler=(sampler.curved if sampler is not None else None), t_offset=t,
            )
            worst_corr = max(worst_corr, adv.max_correction)
            if adv.penetration > PENETRATION_LIMIT:
                termination = "escaped-domain-error"
                s = adv.state
                t += adv.elapsed
                break
            if adv.hit is None:
                s = adv.state
                t = duration
                break
            dt, idx, point, v_in, n_e = adv.hit
            t += dt
            ev = _make_event(table, t, idx, point, v_in, n_e, reflect_it=True)
            if ev.sin_theta < grazing_tol:
                grazing = replace(ev, v_out=None)
                termination = "grazing"
                s = (point[0], point[1], v_in[0], v_in[1])
                break
            events.append(ev)
            if sampler is not None:
                sampler.event(ev, L)
            s = (_wrap(point[0], L[0]), _wrap(point[1], L[1]), ev.v_out[0], ev.v_out[1])
        final = PhasePoint((_wrap(s[0], L[0]), _wrap(s[1], L[1])), (s[2], s[3]))
        t_end = float(t)
    if sampler is not None:
        sampler.finish(t_end, final)
    samples = np.array(sampler.rows, dtype=float).reshape(-1, 6) if sampler is not None else None
    return TrajectoryRecord(
        initial=state.as_float(), duration=float(duration), events=events, termination=termination,
        t_end=t_end, final=final, samples=samples, grazing=grazing, max_correction=worst_corr, step=h,
    )


# --------------------------------------------------------------------------- sampling


def sample_ensemble(table: BilliardTable, n: int, seed: int, clearance: float = 1e-6) -> list[PhasePoint]:
    """Seeded uniform starts over position x direction, away from walls."""
    rng = np.random.default_rng(seed)
    L = np.array(table.periods)
    out = []
    while len(out) < n:
        x, y = rng.random(2) * L
        angle = rng.random() * 2.0 * math.pi
        if all(d > clearance for d in table.signed_distances((x, y))) or not table.walls:
            out.append(PhasePoint.from_angle(table.metric, float(x), float(y), float(angle)))
    return out


# --------------------------------------------------------------------------- horizon


@dataclass
class HorizonReport:
    max_free_time: float  # largest uncapped time to first collision
    capped: list[tuple[float, float, float]]  # (x, y, angle) reaching t_cap with no collision
    free_times: np.ndarray = field(repr=False)  # shape (n_origins, n_directions)
    angles: np.ndarray = field(repr=False)
    origins: np.ndarray = field(repr=False)
    t_cap: float = 0.0

    @property
    def finite_horizon_evidence(self) -> bool:
        return not self.capped


def _flat_first_hits(table: BilliardTable, origin, dirs, t_cap):
    """Vectorized time to first wall contact for many directions from one origin."""
    Lx, Ly = table.periods
    n = len(dirs)
    out = np.full(n, np.inf)
    speed = math.exp(-table.metric.phi_constant)
    V = dirs * speed
    P = np.tile(np.asarray(origin, dtype=float), (n, 1))
    alive = np.arange(n)
    elapsed = 0.0
    chunk_t = 0.5 * min(Lx, Ly) / speed
    while alive.size and elapsed < t_cap:
        tc = min(chunk_t, t_cap - elapsed)
        best = np.full(alive.size, np.inf)
        p, v = P[alive], V[alive]
        for w in table.walls:
            if isinstance(w, CircleWall):
                cx, cy = w.center[0] % Lx, w.center[1] % Ly
                for a in (-1, 0, 1):
                    for b in (-1, 0, 1):
                        dx = p[:, 0] - (cx + a * Lx)
                        dy = p[:, 1] - (cy + b * Ly)
                        bb = dx * v[:, 0] + dy * v[:, 1]
                        c = dx * dx + dy * dy - w.radius**2
                        disc = bb * bb - speed**2 * c
                        ok = (bb < 0) & (disc >= 0)
                        with np.errstate(invalid="ignore", divide="ignore"):
                            t = np.where(ok, c / (-bb + np.sqrt(np.where(ok, disc, 0.0))), np.inf)
                        t[(t <= 0) | (t > tc)] = np.inf
                        best = np.minimum(best, t)
            elif isinstance(w, LineWall):
                pos = p[:, 1] if w.axis == "x" else p[:, 0]
                vel = v[:, 1] if w.axis == "x" else v[:, 0]
                per = Ly if w.axis == "x" else Lx
                with np.errstate(divide="ignore", invalid="ignore"):
                    gap = np.where(vel > 0, w.offset - pos, pos - w.offset) % per
                    t = np.where(vel != 0, gap / np.abs(vel), np.inf)
                t[(t <= 0) | (t > tc)] = np.inf
                best = np.minimum(best, t)
            else:
                raise ValueError("vectorized probe supports circle and line walls only")
        hit = np.isfinite(best)
        out[alive[hit]] = elapsed + best[hit]
        P[alive] = np.mod(p + tc * v, [Lx, Ly])
        alive = alive[~hit]
        elapsed += tc
    return out


def horizon_probe(
    table: BilliardTable,
    n_directions: int,
    n_origins: int,
    t_cap: float,
    *,
    seed: int = 0,
    origins=None,
    h: float = DEFAULT_STEP,
) -> HorizonReport:
    """Time to first collision over a grid of directions from sampled origins.

    Directions are ``2 pi j / n_directions``.  Origins are drawn uniformly from
    the domain (seeded) unless given.  Samples that reach ``t_cap`` are
    infinite-horizon candidates.
    """
    if not t_cap > 0:
        raise ValueError("t_cap must be positive")
    if origins is None:
        origins = [s.position for s in sample_ensemble(table, n_origins, seed)]
    origins = np.asarray(origins, dtype=float).reshape(-1, 2)
    angles = 2.0 * math.pi * np.arange(n_directions) / n_directions
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    times = np.empty((len(origins), n_directions))
    generic = (not table.is_flat) or any(
        not isinstance(w, (CircleWall, LineWall)) for w in table.walls
    )
    for i, o in enumerate(origins):
        if not generic:
            times[i] = _flat_first_hits(table, o, dirs, t_cap)
            continue
        for j, a in enumerate(angles):
            st = PhasePoint.from_angle(table.metric, o[0], o[1], a)
            try:
                ev = next_collision(table, st, t_cap, h=h)
                times[i, j] = np.inf if ev is None else ev.time
            except GrazingCollision as g:
                times[i, j] = g.event.time
    capped_mask = ~np.isfinite(times)
    capped = [
        (float(origins[i, 0]), float(origins[i, 1]), float(angles[j]))
        for i, j in zip(*np.nonzero(capped_mask))
    ]
    finite = times[~capped_mask]
    return HorizonReport(
        max_free_time=float(finite.max()) if finite.size else 0.0,
        capped=capped, free_times=times, angles=angles, origins=origins, t_cap=float(t_cap),
    )
