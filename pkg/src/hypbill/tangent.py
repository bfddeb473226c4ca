"""Linearized dynamics along billiard trajectories.

Perpendicular Jacobi fields are tracked through the scalar coordinate ``y``
and its derivative ``ydot``.  Between collisions ``y'' = -K y``; at a
collision with a wall of geodesic curvature ``kappa`` hit at angle ``theta``

    y+ = -y-,    ydot+ = -ydot- + (2 kappa / sin theta) y-

so the Riccati variable ``u = ydot / y`` jumps by ``-2 kappa / sin theta``.
The parallel component is never propagated: it is unchanged by collisions and
the perpendicular reduction is exact.

Riccati solutions are always carried through ``(y, ydot)``; a blow-up of ``u``
is a zero of ``y``.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .dynamics import (
    DEFAULT_STEP,
    CollisionEvent,
    Segment,
    TrajectoryRecord,
    renormalize,
    rk4_step,
    step_sizes,
)
from .geometry import BilliardTable, MetricField

BLOWUP_WINDOW = 1e-3


class MeshCollisionError(ValueError):
    """A cocycle mesh time coincides with a collision time."""


@dataclass(frozen=True)
class JacobiFrame:
    y: float
    ydot: float
    t: float = 0.0

    @property
    def u(self) -> float:
        return self.ydot / self.y if self.y != 0 else math.nan


@dataclass(frozen=True)
class TangentMatrix:
    """2x2 map on ``(y, ydot)`` transporting ``[t_start, t_end]``."""

    a: float
    b: float
    c: float
    d: float
    t_start: float = 0.0
    t_end: float = 0.0

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    def apply(self, y: float, ydot: float) -> tuple[float, float]:
        return self.a * y + self.b * ydot, self.c * y + self.d * ydot

    def __matmul__(self, other: "TangentMatrix") -> "TangentMatrix":
        # self after other
        return TangentMatrix(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
            other.t_start,
            self.t_end,
        )

    def inverse(self) -> "TangentMatrix":
        det = self.det
        return TangentMatrix(self.d / det, -self.b / det, -self.c / det, self.a / det, self.t_end, self.t_start)

    @classmethod
    def from_array(cls, m, t_start=0.0, t_end=0.0) -> "TangentMatrix":
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]), t_start, t_end)


IDENTITY = TangentMatrix(1.0, 0.0, 0.0, 1.0)


@dataclass
class RiccatiState:
    """Sampled Riccati solution with its underlying Jacobi data.

    ``u`` is ``ydot / y`` wherever ``y != 0``; ``blowup_times`` are the zeros of ``y``.
    """

    t: np.ndarray
    u: np.ndarray
    y: np.ndarray
    ydot: np.ndarray
    blowup_times: list[float] = field(default_factory=list)
    collision: np.ndarray | None = None

    def defined_mask(self, window: float = BLOWUP_WINDOW) -> np.ndarray:
        mask = np.isfinite(self.u)
        for tb in self.blowup_times:
            mask &= np.abs(self.t - tb) > window
        return mask


# --------------------------------------------------------------------------- flights


def _rk4_const_matrix(K: float, h: float) -> np.ndarray:
    """RK4 propagator of ``z' = [[0, 1], [-K, 0]] z`` over one step ``h``."""
    A = np.array([[0.0, 1.0], [-K, 0.0]]) * h
    A2 = A @ A
    return np.eye(2) + A + A2 / 2.0 + A2 @ A / 6.0 + A2 @ A2 / 24.0


def _jacobi_rhs(K, e):
    a, b, c, d = e
    return (c, d, -K * a, -K * b)


class SegmentFlight:
    """Fundamental matrix ``Phi(t)`` of ``y'' = -K y`` along one collision-free segment.

    Three cases: flat metric (closed form), constant curvature override
    (fixed-step RK4 as a matrix power) and curved metric (RK4 coupled to the
    geodesic, on the same step grid as the flow).
    """

    def __init__(self, metric: MetricField, segment: Segment, h: float = DEFAULT_STEP):
        self.metric = metric
        self.segment = segment
        self.h = h
        self.t0 = segment.t0
        self.t1 = segment.t1
        if metric.is_flat and metric.curvature_override is None:
            self.kind = "flat"
        elif metric.is_flat:
            self.kind = "constant"
            self.K = float(metric.curvature_override)
            self._P = _rk4_const_matrix(self.K, h)
        else:
            self.kind = "curved"
            self._grid = None

    def _build_grid(self):
        seg = self.segment
        s = (float(seg.position[0]), float(seg.position[1]), float(seg.velocity[0]), float(seg.velocity[1]))
        e = (1.0, 0.0, 0.0, 1.0)
        times, states, mats = [self.t0], [s], [e]
        t = self.t0
        for hh in step_sizes(self.t1 - self.t0, self.h):
            s, e = rk4_step(self.metric, s, hh, e, _jacobi_rhs)
            s, _ = renormalize(self.metric, s)
            t += hh
            times.append(t)
            states.append(s)
            mats.append(e)
        times[-1] = self.t1
        self._grid = (np.array(times), states, mats)

    def grid(self) -> tuple[np.ndarray, list[np.ndarray]]:
        """Step-grid times over the segment and ``Phi`` at each."""
        if self.kind == "flat":
            ts = np.array([self.t0, self.t1])
            return ts, [np.array([[1.0, tau], [0.0, 1.0]]) for tau in ts - self.t0]
        if self.kind == "constant":
            steps = step_sizes(self.t1 - self.t0, self.h) if self.t1 > self.t0 else []
            ts = [self.t0]
            mats = [np.eye(2)]
            for hh in steps:
                P = self._P if hh == self.h else _rk4_const_matrix(self.K, hh)
                mats.append(P @ mats[-1])
                ts.append(ts[-1] + hh)
            ts[-1] = self.t1
            return np.array(ts), mats
        if self._grid is None:
            self._build_grid()
        ts, _, mats = self._grid
        return ts, [np.array([[m[0], m[1]], [m[2], m[3]]]) for m in mats]

    def matrix_at(self, t: float) -> np.ndarray:
        """``Phi(t)`` for ``t`` in ``[t0, t1]`` (transport from ``t0``)."""
        tau = t - self.t0
        if self.kind == "flat":
            return np.array([[1.0, tau], [0.0, 1.0]])
        if self.kind == "constant":
            return self.transport(self.t0, t)
        if self._grid is None:
            self._build_grid()
        ts, states, mats = self._grid
        i = int(np.searchsorted(ts, t, side="right")) - 1
        i = min(max(i, 0), len(ts) - 1)
        dt = t - ts[i]
        e = mats[i]
        if dt > 1e-14 and i < len(ts) - 1:
            _, e = rk4_step(self.metric, states[i], dt, e, _jacobi_rhs)
        return np.array([[e[0], e[1]], [e[2], e[3]]])

    def transport(self, ta: float, tb: float) -> np.ndarray:
        """Matrix mapping ``(y, ydot)`` at ``ta`` to ``tb`` within the segment.

        Integrates forward from ``ta`` rather than inverting ``Phi(ta)``, which
        is ill-conditioned on long hyperbolic flights.
        """
        tau = tb - ta
        if self.kind == "flat":
            return np.array([[1.0, tau], [0.0, 1.0]])
        if self.kind == "constant":
            if tau <= 0:
                return np.eye(2)
            n = int(math.floor(tau / self.h + 1e-9))
            rem = tau - n * self.h
            M = np.linalg.matrix_power(self._P, n)
            if rem > 1e-14:
                M = _rk4_const_matrix(self.K, rem) @ M
            return M
        if self._grid is None:
            self._build_grid()
        ts, states, _ = self._grid
        i = int(np.searchsorted(ts, ta, side="right")) - 1
        i = min(max(i, 0), len(ts) - 1)
        s = states[i]
        if ta - ts[i] > 1e-14 and i < len(ts) - 1:
            s, _ = rk4_step(self.metric, s, ta - ts[i])
        e = (1.0, 0.0, 0.0, 1.0)
        t = ta
        j = i + 1
        while t < tb - 1e-14:
            target = ts[j] if j < len(ts) and ts[j] < tb else tb
            s_new, e = rk4_step(self.metric, s, target - t, e, _jacobi_rhs)
            if j < len(ts) and target == ts[j]:
                # back on the step grid: reuse the stored state
                s = states[j]
                j += 1
            else:
                s = s_new
            t = target
        return np.array([[e[0], e[1]], [e[2], e[3]]])


def jacobi_flight(
    metric: MetricField, segment: Segment, frame: JacobiFrame, h: float = DEFAULT_STEP
) -> tuple[JacobiFrame, TangentMatrix]:
    """Integrate ``y'' = -K(gamma(t)) y`` over a collision-free segment."""
    M = SegmentFlight(metric, segment, h).matrix_at(segment.t1)
    tm = TangentMatrix.from_array(M, segment.t0, segment.t1)
    y, yd = tm.apply(frame.y, frame.ydot)
    return JacobiFrame(y, yd, segment.t1), tm


def collision_matrix(event: CollisionEvent) -> TangentMatrix:
    """``[[-1, 0], [2 kappa / sin theta, -1]]`` (determinant exactly 1)."""
    return TangentMatrix(-1.0, 0.0, 2.0 * event.kappa / event.sin_theta, -1.0, event.time, event.time)


def jacobi_collision(frame: JacobiFrame, event: CollisionEvent) -> tuple[JacobiFrame, TangentMatrix]:
    if not event.sin_theta > 0:
        raise ValueError("grazing collision has no Jacobi map")
    M = collision_matrix(event)
    y, yd = M.apply(frame.y, frame.ydot)
    return JacobiFrame(y, yd, event.time), M


def riccati_collision(u_minus: float, event: CollisionEvent) -> float:
    """``u+ = u- - 2 kappa / sin theta``."""
    if not event.sin_theta > 0:
        raise ValueError("grazing collision has no Riccati jump")
    return u_minus - 2.0 * event.kappa / event.sin_theta


def _refine_zero(flight: SegmentFlight, ta: float, tb: float, ya: float, yda: float, tol=1e-13):
    """Bisection for the zero of ``y`` in ``[ta, tb]`` given ``(y, ydot)`` at ``ta``."""

    def yat(t):
        M = flight.transport(ta, t)
        return M[0, 0] * ya + M[0, 1] * yda

    fa = ya
    lo, hi = ta, tb
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = yat(mid)
        if fm != 0 and (fm > 0) == (fa > 0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def riccati_flight(
    metric: MetricField,
    segment: Segment,
    u0: float,
    *,
    stride: float | None = None,
    h: float = DEFAULT_STEP,
) -> RiccatiState:
    """Riccati solution ``u' = -K - u^2`` with ``u(t0) = u0`` along a segment.

    Propagated as ``(y, ydot) = (1, u0)`` through the Jacobi equation; samples
    sit on the integrator grid (or every ``stride``), zeros of ``y`` are
    located by bisection and recorded as blow-ups.
    """
    flight = SegmentFlight(metric, segment, h)
    if stride is None:
        ts, mats = flight.grid()
        if flight.kind == "flat":
            n = max(2, int(math.ceil(segment.duration / h)) + 1)
            ts = np.linspace(segment.t0, segment.t1, n)
            mats = [np.array([[1.0, tau], [0.0, 1.0]]) for tau in ts - segment.t0]
    else:
        ts = np.append(np.arange(segment.t0, segment.t1, stride), segment.t1)
        mats = [flight.matrix_at(t) for t in ts]
    ys = np.array([M[0, 0] + M[0, 1] * u0 for M in mats])
    yds = np.array([M[1, 0] + M[1, 1] * u0 for M in mats])
    blowups = []
    if flight.kind == "flat":
        if u0 < 0 and -1.0 / u0 <= segment.duration:
            blowups.append(segment.t0 - 1.0 / u0)
    else:
        for i in range(len(ts) - 1):
            if ys[i] == 0.0:
                blowups.append(float(ts[i]))
            elif ys[i] * ys[i + 1] < 0:
                blowups.append(float(_refine_zero(flight, ts[i], ts[i + 1], ys[i], yds[i])))
        if ys[-1] == 0.0:
            blowups.append(float(ts[-1]))
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(ys != 0, yds / ys, np.nan)
    return RiccatiState(np.asarray(ts, dtype=float), u, ys, yds, blowups)


def riccati_direct(
    metric: MetricField, segment: Segment, u0: float, h: float = DEFAULT_STEP, switch: float = 2.0
) -> RiccatiState:
    """Direct RK4 integration of ``u' = -K - u^2`` on the integrator grid.

    Independent of the Jacobi route; used to cross-check it.  Where ``|u|``
    exceeds ``switch`` the reciprocal ``w = 1/u`` (``w' = 1 + K w^2``) is
    integrated instead, which carries the solution through blow-ups.
    """
    seg = segment
    s = (float(seg.position[0]), float(seg.position[1]), float(seg.velocity[0]), float(seg.velocity[1]))
    flat = metric.is_flat
    K_const = metric.curvature(0.0, 0.0) if flat else None

    def rhs_u(K, e):
        return (-K - e[0] * e[0],)

    def rhs_w(K, e):
        return (1.0 + K * e[0] * e[0],)

    def step_const(rhs, e, hh):
        k1 = rhs(K_const, e)
        k2 = rhs(K_const, (e[0] + 0.5 * hh * k1[0],))
        k3 = rhs(K_const, (e[0] + 0.5 * hh * k2[0],))
        k4 = rhs(K_const, (e[0] + hh * k3[0],))
        return (e[0] + hh / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),)

    recip = abs(u0) > switch
    val = (1.0 / u0,) if recip else (u0,)
    t = seg.t0
    ts, us = [t], [u0]
    blowups = []
    for hh in step_sizes(seg.duration, h):
        rhs = rhs_w if recip else rhs_u
        if flat:
            new = step_const(rhs, val, hh)
        else:
            s, new = rk4_step(metric, s, hh, val, rhs)
            s, _ = renormalize(metric, s)
        if recip and new[0] * val[0] < 0 or (recip and new[0] == 0.0):
            # w crossed zero: linear estimate of the blow-up time
            blowups.append(t + hh * val[0] / (val[0] - new[0]))
        val = new
        t += hh
        if recip:
            u = 1.0 / val[0] if val[0] != 0 else math.nan
            if abs(val[0]) > 1.0 / switch * 2.0:
                recip, val = False, (u,)
        else:
            u = val[0]
            if abs(u) > switch:
                recip, val = True, (1.0 / u,)
        ts.append(t)
        us.append(u)
    ts[-1] = seg.t1
    us = np.array(us)
    return RiccatiState(np.array(ts), us, np.full(len(us), np.nan), np.full(len(us), np.nan), blowups)


def riccati_consistency_check(
    frame_trace: RiccatiState, riccati_trace: RiccatiState, window: float = BLOWUP_WINDOW
) -> float:
    """Max ``|u_direct - ydot/y| / (1 + |u|)`` over shared times away from blow-ups."""
    ta, tb = frame_trace.t, riccati_trace.t
    if len(ta) != len(tb) or np.max(np.abs(ta - tb)) > 1e-9:
        raise ValueError("traces must be sampled on the same times")
    with np.errstate(divide="ignore", invalid="ignore"):
        u_frame = frame_trace.ydot / frame_trace.y
    mask = np.isfinite(u_frame) & np.isfinite(riccati_trace.u)
    for tbl in list(frame_trace.blowup_times) + list(riccati_trace.blowup_times):
        mask &= np.abs(ta - tbl) > window
    if not mask.any():
        return 0.0
    dev = np.abs(riccati_trace.u[mask] - u_frame[mask]) / (1.0 + np.abs(u_frame[mask]))
    return float(dev.max())


def alpha_bound(k_max: float, eta: float) -> float:
    """Upper bound for ``u`` after a collision-free window of length ``eta``.

    ``sqrt(K) (1 + exp(-2 sqrt(K) eta)) / (1 - exp(-2 sqrt(K) eta))``, with the
    flat limit ``1/eta``.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    if k_max <= 0:
        return 1.0 / eta
    r = math.sqrt(k_max)
    x = 2.0 * r * eta
    if x < 1e-8:
        return 1.0 / eta + r * r * eta / 3.0
    # coth form; expm1 keeps precision for small arguments
    return r / math.tanh(r * eta)


# --------------------------------------------------------------------------- timelines


class ScanPoint(NamedTuple):
    t: float
    u: float  # right limit u(t+)
    u_min: float  # min of u(s+) over [t_start, t]; -inf after a blow-up
    collisions: int  # collisions in (t_start, t]
    blown: bool


class TangentTimeline:
    """Jacobi transport along a whole :class:`TrajectoryRecord`.

    A collision at time ``tc`` belongs to the interval ``(ta, tb]`` when
    ``ta < tc <= tb``, so transports end on right limits ``t+``.
    """

    def __init__(self, table: BilliardTable, record: TrajectoryRecord, h: float | None = None):
        self.table = table
        self.record = record
        self.h = h if h is not None else record.step
        self.flights = [SegmentFlight(table.metric, seg, self.h) for seg in record.segments()]
        self.events = record.events
        self.collision_times = [ev.time for ev in record.events]
        self.collisions = [collision_matrix(ev) for ev in record.events]
        self.starts = [f.t0 for f in self.flights]

    @property
    def t_end(self) -> float:
        return self.record.t_end

    def _segment_index(self, t: float) -> int:
        """Index of the flight containing ``t`` (collision times map to the later flight)."""
        return max(0, bisect.bisect_right(self.starts, t) - 1)

    def matrix(self, ta: float, tb: float) -> TangentMatrix:
        """Transport from ``ta+`` to ``tb+``."""
        if tb < ta:
            raise ValueError("tb must not precede ta")
        i = self._segment_index(ta)
        j = self._segment_index(tb)
        if i == j:
            return TangentMatrix.from_array(self.flights[i].transport(ta, tb), ta, tb)
        M = self.flights[i].transport(ta, self.flights[i].t1)
        for k in range(i, j):
            C = self.collisions[k]
            M = np.array([[C.a, C.b], [C.c, C.d]]) @ M
            if k + 1 < j:
                f = self.flights[k + 1]
                M = f.transport(f.t0, f.t1) @ M
        f = self.flights[j]
        M = f.transport(f.t0, tb) @ M
        return TangentMatrix.from_array(M, ta, tb)

    def scan(self, t_start: float, t_stop: float, u0: float, times: Sequence[float]) -> list[ScanPoint]:
        """Riccati solution from ``u(t_start+) = u0`` evaluated at sorted ``times``.

        Tracks ``min u`` over the integrator grid (exactly on flat flights,
        where ``u`` is monotone) and blow-ups as zeros of ``y``.
        """
        times = [t for t in times if t_start <= t <= t_stop]
        out: list[ScanPoint] = []
        y, yd = 1.0, u0
        u_min = u0
        blown = False
        ncol = 0
        ti = 0
        nf = len(self.flights)
        i = self._segment_index(t_start)
        t_cur = t_start
        while i < nf and ti < len(times):
            f = self.flights[i]
            last = i == nf - 1
            seg_end = min(f.t1, t_stop)
            pts = set()
            # a time equal to a collision time is reported after the jump
            while ti < len(times) and times[ti] <= seg_end and (times[ti] < f.t1 or last):
                pts.add(times[ti])
                ti += 1
            grid = [] if f.kind == "flat" else [g for g in f.grid()[0] if t_cur < g < seg_end]
            for te in sorted(set(grid) | pts | {seg_end}):
                M = f.transport(t_cur, te)
                ny = float(M[0, 0] * y + M[0, 1] * yd)
                nyd = float(M[1, 0] * y + M[1, 1] * yd)
                if not blown and (ny == 0.0 or (ny > 0) != (y > 0)):
                    blown, u_min = True, -math.inf
                t_cur, y, yd = te, ny, nyd
                u_here = yd / y if y != 0 else -math.inf
                if not blown:
                    u_min = min(u_min, u_here)
                if te in pts:
                    out.append(ScanPoint(te, u_here, u_min, ncol, blown))
            if last or seg_end < f.t1:
                break
            y, yd = self.collisions[i].apply(y, yd)
            ncol += 1
            u_here = yd / y if y != 0 else -math.inf
            if not blown:
                u_min = min(u_min, u_here)
            while ti < len(times) and times[ti] == f.t1:
                out.append(ScanPoint(times[ti], u_here, u_min, ncol, blown))
                ti += 1
            i += 1
        return out

    def collisions_between(self, ta: float, tb: float, closed_right: bool = True) -> int:
        """Number of collisions in ``(ta, tb]`` (or ``(ta, tb)``)."""
        lo = bisect.bisect_right(self.collision_times, ta)
        hi = bisect.bisect_right(self.collision_times, tb) if closed_right else bisect.bisect_left(self.collision_times, tb)
        return max(0, hi - lo)


def cocycle(
    table: BilliardTable, record: TrajectoryRecord, mesh: Sequence[float], h: float | None = None
) -> list[TangentMatrix]:
    """Tangent matrices between consecutive mesh times along a trajectory."""
    mesh = [float(t) for t in mesh]
    if any(b <= a for a, b in zip(mesh, mesh[1:])):
        raise ValueError("mesh times must be strictly increasing")
    if mesh and (mesh[0] < 0 or mesh[-1] > record.t_end + 1e-12):
        raise ValueError("mesh times must lie inside the trajectory")
    times = [ev.time for ev in record.events]
    for t in mesh:
        k = bisect.bisect_left(times, t)
        for j in (k - 1, k):
            if 0 <= j < len(times) and abs(times[j] - t) < 1e-9:
                raise MeshCollisionError(f"mesh time {t!r} hits the collision at {times[j]!r}")
    tl = TangentTimeline(table, record, h)
    return [tl.matrix(a, b) for a, b in zip(mesh, mesh[1:])]


def riccati_along(
    table: BilliardTable, record: TrajectoryRecord, u0: float, stride: float
) -> list[tuple[float, float, float, float, int, int]]:
    """Generalized Riccati solution over a whole trajectory.

    Rows ``(t, u, y, ydot, blowup_flag, collision_flag)``: samples every
    ``stride``, one row per blow-up (``u`` is NaN there) and one post-jump row
    per collision.  ``(y, ydot)`` is rescaled by positive factors when it grows
    past 1e100, which leaves ``u`` untouched.
    """
    tl = TangentTimeline(table, record)
    rows = []
    y, yd = 1.0, u0
    for i, f in enumerate(tl.flights):
        ts = [f.t0] + [k * stride for k in range(int(math.floor(f.t0 / stride)) + 1, int(math.ceil(f.t1 / stride)))]
        ts = sorted(set(t for t in ts if f.t0 <= t < f.t1)) + [f.t1]
        prev_t, prev_y, prev_yd = f.t0, y, yd
        for te in ts:
            M = f.transport(prev_t, te)
            ny = float(M[0, 0] * prev_y + M[0, 1] * prev_yd)
            nyd = float(M[1, 0] * prev_y + M[1, 1] * prev_yd)
            if te > f.t0 and (ny > 0) != (prev_y > 0) and prev_y != 0:
                # zero of y between samples
                tz = _refine_zero(f, prev_t, te, prev_y, prev_yd)
                Mz = f.transport(prev_t, tz)
                rows.append((tz, math.nan, 0.0, float(Mz[1, 0] * prev_y + Mz[1, 1] * prev_yd), 1, 0))
            if te < f.t1 or i == len(tl.flights) - 1:
                rows.append((te, nyd / ny if ny != 0 else math.nan, ny, nyd, 0, 0))
            prev_t, prev_y, prev_yd = te, ny, nyd
        y, yd = prev_y, prev_yd
        scale = abs(y) + abs(yd)
        if scale > 1e100:
            y, yd = y / scale, yd / scale
        if i < len(tl.collisions):
            y, yd = tl.collisions[i].apply(y, yd)
            rows.append((f.t1, yd / y if y != 0 else math.nan, y, yd, 0, 1))
    return rows
