"""Hyperbolicity criteria: cone engine, Riccati time sequences, Sinai mode, Lyapunov exponents.

All verdicts are numerical evidence over finite samples and finite windows.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Iterable, Sequence

import numpy as np

from .dynamics import DEFAULT_STEP, PhasePoint, Segment, TrajectoryRecord, flow, horizon_probe, rk4_step, renormalize, step_sizes
from .geometry import BilliardTable, MetricField, is_dispersing
from .tangent import TangentMatrix, TangentTimeline, alpha_bound, riccati_flight

CERTIFIED = "certified"
REFUTED = "refuted-witness"
INCONCLUSIVE = "inconclusive"
INFINITE_HORIZON = "infinite-horizon-candidate"
NOT_CERTIFIED = "not-certified"


class NonContractingWarning(UserWarning):
    """Iterated cones fail to shrink."""


class ConstantsWarning(UserWarning):
    """User-supplied criterion constants were adjusted."""


class CertifyInputError(ValueError):
    """The table or constants do not meet a criterion's preconditions."""


def parallel_map(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    """Order-preserving map, optionally over a process pool."""
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


# --------------------------------------------------------------------------- cones


@dataclass(frozen=True)
class ConeParams:
    """The cone ``C_eps = {eps * y <= x <= y / eps}`` inside the positive quadrant."""

    epsilon: float

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")

    def contains(self, v) -> bool:
        x, y = float(v[0]), float(v[1])
        e = self.epsilon
        return x > 0 and y > 0 and e * y <= x <= y / e

    @property
    def gain_bound(self) -> float:
        return 1.0 / (1.0 - self.epsilon**2)


def _as_array(M) -> np.ndarray:
    if isinstance(M, TangentMatrix):
        return M.as_array()
    return np.asarray(M, dtype=float).reshape(2, 2)


def _sign_normalized(M) -> np.ndarray:
    """Multiply by ``-Id`` when that makes the first column nonnegative."""
    A = _as_array(M)
    if A[0, 0] < 0 or (A[0, 0] == 0 and A[1, 0] < 0):
        return -A
    return A


def _check_det(A: np.ndarray, tol: float = 1e-8) -> None:
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    if abs(abs(det) - 1.0) > tol:
        raise ValueError(f"determinant {det!r} is not +-1")


def cone_map_check(M, eps) -> bool:
    """Whether ``M`` (up to ``-Id``) maps the open quadrant cone into ``C_eps``.

    Checks the images of the boundary rays ``(1, 0)`` and ``(0, 1)``; the rest
    follows by linearity.
    """
    cone = eps if isinstance(eps, ConeParams) else ConeParams(float(eps))
    A = _as_array(M)
    _check_det(A)
    A = _sign_normalized(A)
    return cone.contains(A[:, 0]) and cone.contains(A[:, 1])


def cone_parameter(M) -> float:
    """Largest ``eps`` accepted by :func:`cone_map_check` (0 when none is)."""
    A = _sign_normalized(M)
    if np.any(A <= 0):
        return 0.0
    r = [A[0, 0] / A[1, 0], A[0, 1] / A[1, 1]]
    return float(min(min(x, 1.0 / x) for x in r))


def quadratic_form(v) -> float:
    return float(v[0]) * float(v[1])


def expansion_gain(M, v) -> float:
    """``Q(Mv) / Q(v)`` for ``Q(x, y) = x y``."""
    q = quadratic_form(v)
    if not q > 0:
        raise ValueError("v must lie in the open positive cone")
    A = _as_array(M)
    w = A @ np.asarray(v, dtype=float)
    return quadratic_form(w) / q


def _line_angle(v) -> float:
    return math.atan2(v[1], v[0]) % math.pi


def _arc(r1, r2, mid) -> tuple[float, float]:
    """Projective arc from ``r1`` to ``r2`` through ``mid``: (width, bisector angle)."""
    a1, a2, am = _line_angle(r1), _line_angle(r2), _line_angle(mid)
    span = (a2 - a1) % math.pi
    if min(span, math.pi - span) < 1e-13:
        return 0.0, am  # edges merged in floating point
    if (am - a1) % math.pi <= span:
        return span, (a1 + span / 2.0) % math.pi
    width = math.pi - span
    return width, (a2 + width / 2.0) % math.pi


@dataclass
class DirectionField:
    """Approximate invariant directions at mesh points ``0..n`` (angles of lines, in ``[0, pi)``)."""

    unstable_angle: np.ndarray
    stable_angle: np.ndarray
    unstable_diameter: np.ndarray
    stable_diameter: np.ndarray
    contracting: bool

    def unstable_vector(self, k: int) -> np.ndarray:
        a = self.unstable_angle[k]
        return np.array([math.cos(a), math.sin(a)])

    def stable_vector(self, k: int) -> np.ndarray:
        a = self.stable_angle[k]
        return np.array([math.cos(a), math.sin(a)])


def _iterate_cone(mats: Iterable[np.ndarray], mid) -> tuple[float, float, bool]:
    r1, r2, m = np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.asarray(mid, dtype=float)
    width0, angle = _arc(r1, r2, m)
    width = width0
    for A in mats:
        r1, r2, m = A @ r1, A @ r2, A @ m
        r1, r2, m = r1 / np.linalg.norm(r1), r2 / np.linalg.norm(r2), m / np.linalg.norm(m)
        width, angle = _arc(r1, r2, m)
    # angular width is not monotone under a strict cone map, so only the net shrink counts
    return width, angle, width < width0 - 1e-12


def invariant_directions(cocycle: Sequence, iterations: int = 40) -> DirectionField:
    """Unstable and stable directions of a cocycle by finite cone iteration.

    Forward images of the quadrant cone ``{xy > 0}`` approximate ``E^u`` at
    each mesh point; backward images of ``{xy < 0}`` under the inverses
    approximate ``E^s``.  The angular width of the iterated cone is the
    convergence measure.
    """
    mats = [_as_array(M) for M in cocycle]
    invs = [np.linalg.inv(A) for A in mats]
    n = len(mats)
    ua, sa, ud, sd = (np.zeros(n + 1) for _ in range(4))
    contracting = True
    for k in range(n + 1):
        i = min(iterations, k)
        ud[k], ua[k], ok_u = _iterate_cone(mats[k - i:k], (1.0, 1.0))
        j = min(iterations, n - k)
        sd[k], sa[k], ok_s = _iterate_cone(reversed(invs[k:k + j]), (1.0, -1.0))
        if (i > 0 and not ok_u) or (j > 0 and not ok_s):
            contracting = False
    if not contracting or n == 0:
        warnings.warn("iterated cones do not shrink", NonContractingWarning, stacklevel=2)
        contracting = False
    return DirectionField(ua, sa, ud, sd, contracting)


# --------------------------------------------------------------------------- constants


@dataclass(frozen=True)
class CriterionConstants:
    """Constants of the time-sequence criterion and the proof constants derived from them.

    ``m`` is clipped to ``min(exp(-4 A C), 1/4)`` with a warning; the requested
    value is kept in ``m_requested``.
    """

    A: float
    m: float
    c: float
    C: float
    k_max: float = 0.0
    m_requested: float | None = None

    def __post_init__(self):
        for name in ("A", "m", "c", "C"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise CertifyInputError(f"{name} must be a positive number, got {v!r}")
        if self.A < 2:
            raise CertifyInputError(f"A must be at least 2, got {self.A!r}")
        if self.c > self.C:
            raise CertifyInputError(f"c={self.c!r} exceeds C={self.C!r}")
        if not (self.k_max >= 0 and math.isfinite(self.k_max)):
            raise CertifyInputError(f"k_max must be finite and nonnegative, got {self.k_max!r}")
        bound = self.m_bound
        if self.m > bound:
            if self.m_requested is None:
                object.__setattr__(self, "m_requested", float(self.m))
            warnings.warn(f"m={self.m!r} clipped to {bound!r}", ConstantsWarning, stacklevel=3)
            object.__setattr__(self, "m", bound)
        if not self.eta > 0:
            raise CertifyInputError("eta underflows; C is too large for double precision")

    @property
    def m_bound(self) -> float:
        return min(math.exp(-4.0 * self.A * self.C), 0.25)

    @property
    def eta(self) -> float:
        return min(self.m**3 / (self.k_max + 4.0), self.c / 3.0)

    @property
    def alpha(self) -> float:
        return alpha_bound(self.k_max, self.eta)

    @property
    def epsilon(self) -> float:
        return min(self.m / 2.0, self.m**2 / 2.0, 1.0 / self.alpha)

    def with_m(self, m: float) -> "CriterionConstants":
        return CriterionConstants(self.A, m, self.c, self.C, self.k_max)

    def as_dict(self) -> dict:
        return {
            "A": self.A, "m": self.m, "m_requested": self.m_requested, "c": self.c, "C": self.C,
            "K_max": self.k_max, "eta": self.eta, "alpha": self.alpha, "epsilon": self.epsilon,
        }


# --------------------------------------------------------------------------- time sequences


@dataclass
class TimeSequence:
    """Greedy time sequence along one trajectory and its per-interval Riccati summary."""

    times: list[float]
    collisions: list[int]  # collisions in (t_k, t_k+1]
    min_u: list[float]  # min u(t+) over [t_k, t_k+1] from u(t_k+) = 0
    terminal_u: list[float]  # u(t_k+1 +)
    window: tuple[float, float]
    status: str  # complete | stalled | refuted | no-collisions
    termination: str = "time-limit"
    witness: dict | None = None

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.times)

    def summary(self) -> dict:
        g = self.gaps
        return {
            "status": self.status,
            "termination": self.termination,
            "window": list(self.window),
            "intervals": len(g),
            "first_time": self.times[0] if self.times else None,
            "last_time": self.times[-1] if self.times else None,
            "min_gap": float(g.min()) if len(g) else None,
            "max_gap": float(g.max()) if len(g) else None,
            "min_u": float(min(self.min_u)) if self.min_u else None,
            "min_terminal_u": float(min(self.terminal_u)) if self.terminal_u else None,
            "max_collisions": int(max(self.collisions)) if self.collisions else None,
        }


def _candidates(tl: TangentTimeline, tk: float, lo: float, hi: float, mode: str, stride: float) -> list[float]:
    coll = [t for t in tl.collision_times if lo <= t <= hi]
    if mode == "collisions":
        return coll
    n = int(math.floor((hi - lo) / stride + 1e-9))
    grid = [lo + j * stride for j in range(n + 1)]
    if hi - grid[-1] > 1e-12:
        grid.append(hi)
    return sorted(set(grid) | set(coll))


def build_time_sequence(
    table: BilliardTable, record: TrajectoryRecord, constants: CriterionConstants,
    mode: str = "grid", stride: float | None = None,
) -> TimeSequence:
    """Greedy earliest-feasible sequence ``t_k`` over the record's window.

    ``mode="collisions"`` restricts candidates to collision times and starts
    at the first collision; ``mode="grid"`` starts at 0 and scans a grid of
    ``stride`` (default ``c/10``) plus the collision times.
    """
    A, m, c, C = constants.A, constants.m, constants.c, constants.C
    stride = stride or c / 10.0
    tl = TangentTimeline(table, record)
    t_end = record.t_end
    window = (0.0, t_end)
    if mode == "collisions":
        if not tl.collision_times:
            return TimeSequence([], [], [], [], window, "no-collisions", record.termination)
        tk = tl.collision_times[0]
    elif mode == "grid":
        tk = 0.0
    else:
        raise ValueError(f"unknown candidate mode {mode!r}")
    seq = TimeSequence([tk], [], [], [], window, "complete", record.termination)
    while True:
        lo, hi = tk + c, tk + C
        if lo > t_end:
            break
        hi_eff = min(hi, t_end)
        cands = _candidates(tl, tk, lo, hi_eff, mode, stride)
        pts = tl.scan(tk, hi_eff, 0.0, cands) if cands else []
        chosen = None
        for sp in pts:
            if sp.u_min < -A or sp.collisions > 1:
                break  # both only get worse at later candidates
            if not sp.u > m:
                continue
            if tl.collisions_between(sp.t - c, sp.t, closed_right=False) > 0:
                continue
            chosen = sp
            break
        if chosen is not None:
            seq.times.append(chosen.t)
            seq.collisions.append(chosen.collisions)
            seq.min_u.append(chosen.u_min)
            seq.terminal_u.append(chosen.u)
            tk = chosen.t
            continue
        if pts and pts[0].u_min < -A:
            seq.status = "refuted"
            seq.witness = {"t_k": tk, "candidate": pts[0].t, "u_min": pts[0].u_min, "blown": pts[0].blown}
        elif hi > t_end:
            pass  # the next admissible time lies beyond the window
        else:
            seq.status = "stalled"
            seq.witness = {"t_k": tk, "candidates": len(cands)}
        break
    return seq


def verify_time_sequence(
    table: BilliardTable, record: TrajectoryRecord, times: Sequence[float], constants: CriterionConstants
) -> bool:
    """Check every clause of the criterion on a given sequence."""
    tl = TangentTimeline(table, record)
    c, C = constants.c, constants.C
    for ta, tb in zip(times, times[1:]):
        if not (c - 1e-12 <= tb - ta <= C + 1e-12):
            return False
        if tl.collisions_between(tb - c, tb, closed_right=False) > 0:
            return False
        if tl.collisions_between(ta, tb) > 1:
            return False
        sp = tl.scan(ta, tb, 0.0, [tb])[0]
        if sp.u_min < -constants.A or not sp.u > constants.m:
            return False
    return True


# --------------------------------------------------------------------------- certificates


@dataclass
class Certificate:
    verdict: str
    mode: str
    window: float
    constants: CriterionConstants | None
    sequences: list[TimeSequence] = field(default_factory=list)
    estimate: dict = field(default_factory=dict)
    cones: dict = field(default_factory=dict)
    witness: dict | None = None
    notes: list[str] = field(default_factory=list)
    dropped: int = 0

    @property
    def min_terminal_u(self) -> float:
        vals = [min(s.terminal_u) for s in self.sequences if s.terminal_u]
        return float(min(vals)) if vals else math.nan

    def report(self) -> dict:
        return {
            "verdict": self.verdict,
            "mode": self.mode,
            "window": self.window,
            "constants": self.constants.as_dict() if self.constants else None,
            "trajectories": len(self.sequences),
            "dropped": self.dropped,
            "min_terminal_u": None if math.isnan(self.min_terminal_u) else self.min_terminal_u,
            "estimate": self.estimate,
            "cones": self.cones,
            "sequences": [s.summary() for s in self.sequences],
            "witness": self.witness,
            "notes": self.notes,
        }


def _cocycle_stats(table: BilliardTable, record: TrajectoryRecord, seq: TimeSequence, eps: float) -> dict:
    """Cone checks and growth of the cocycle over the sequence (right limits at each t_k)."""
    tl = TangentTimeline(table, record)
    v = np.array([1.0, 1.0]) / math.sqrt(2.0)
    log_growth = [0.0]
    passed = 0
    measured = math.inf
    min_gain = math.inf
    max_det_err = 0.0
    for ta, tb in zip(seq.times, seq.times[1:]):
        M = tl.matrix(ta, tb)
        A = M.as_array()
        max_det_err = max(max_det_err, abs(abs(M.det) - 1.0))
        if eps > 0 and cone_map_check(A, eps):
            passed += 1
        measured = min(measured, cone_parameter(A))
        An = _sign_normalized(A)
        if np.all(An > 0):
            min_gain = min(min_gain, expansion_gain(An, (1.0, 1.0)))
        w = An @ v
        nw = float(np.linalg.norm(w))
        log_growth.append(log_growth[-1] + math.log(nw))
        v = w / nw
    return {
        "factors": len(seq.times) - 1,
        "passed": passed,
        "measured_epsilon": measured if math.isfinite(measured) else 0.0,
        "min_axis_gain": min_gain if math.isfinite(min_gain) else None,
        "max_det_error": max_det_err,
        "log_growth": log_growth,
    }


def _estimate(sequences: list[TimeSequence], stats: list[dict]) -> dict:
    """Empirical (a, lambda) with ||P_k v|| >= exp(rate * (t_k - t_0)) / a."""
    rates = []
    for seq, st in zip(sequences, stats):
        if len(seq.times) > 1 and seq.times[-1] > seq.times[0]:
            rates.append(st["log_growth"][-1] / (seq.times[-1] - seq.times[0]))
    if not rates:
        return {}
    rate = min(rates)
    log_a = 0.0
    for seq, st in zip(sequences, stats):
        for tk, lg in zip(seq.times, st["log_growth"]):
            log_a = max(log_a, rate * (tk - seq.times[0]) - lg)
    return {"rate": rate, "lambda": math.exp(-rate), "a": math.exp(log_a), "mean_rate": float(np.mean(rates))}


def _theorem3_one(args, table, constants, mode, stride, check_cones):
    record = args
    seq = build_time_sequence(table, record, constants, mode, stride)
    stats = _cocycle_stats(table, record, seq, constants.epsilon) if check_cones else None
    return seq, stats


def _flow_one(point, table, T, h):
    return flow(table, point, T, h=h)


def _aggregate(mode, T, constants, results, dropped=0, notes=None) -> Certificate:
    sequences = [r[0] for r in results]
    stats = [r[1] for r in results if r[1] is not None]
    statuses = [s.status for s in sequences]
    witness = None
    if "refuted" in statuses:
        verdict = REFUTED
        i = statuses.index("refuted")
        witness = {"trajectory": i, **sequences[i].witness}
    elif all(s == "complete" for s in statuses) and sequences:
        verdict = CERTIFIED
    else:
        verdict = INCONCLUSIVE
        bad = [i for i, s in enumerate(statuses) if s != "complete"]
        if bad:
            witness = {"trajectory": bad[0], "status": statuses[bad[0]], **(sequences[bad[0]].witness or {})}
    cones = {}
    if stats:
        cones = {
            "epsilon": constants.epsilon,
            "factors": sum(s["factors"] for s in stats),
            "passed": sum(s["passed"] for s in stats),
            "measured_epsilon": min(s["measured_epsilon"] for s in stats),
            "max_det_error": max(s["max_det_error"] for s in stats),
        }
        gains = [s["min_axis_gain"] for s in stats if s["min_axis_gain"] is not None]
        cones["min_axis_gain"] = min(gains) if gains else None
    return Certificate(
        verdict, mode, T, constants, sequences, _estimate(sequences, stats) if stats else {},
        cones, witness, list(notes or []), dropped,
    )


def certify_theorem3(
    table: BilliardTable,
    ensemble: Sequence[PhasePoint],
    T: float,
    constants: CriterionConstants,
    *,
    mode: str = "grid",
    stride: float | None = None,
    h: float = DEFAULT_STEP,
    jobs: int = 1,
    check_cones: bool = True,
    records: Sequence[TrajectoryRecord] | None = None,
) -> Certificate:
    """Time-sequence Riccati criterion over an ensemble.

    Certified when every trajectory's greedy sequence covers its window,
    refuted when some interval breaks ``u >= -A`` for every admissible
    candidate, inconclusive otherwise.
    """
    if not T > 0:
        raise CertifyInputError("duration must be positive")
    if records is None:
        records = parallel_map(partial(_flow_one, table=table, T=T, h=h), ensemble, jobs)
    worker = partial(_theorem3_one, table=table, constants=constants, mode=mode, stride=stride, check_cones=check_cones)
    results = parallel_map(worker, records, jobs)
    notes = [f"finite window [0, {T}] per trajectory"]
    grazed = sum(r.termination != "time-limit" for r in records)
    if grazed:
        notes.append(f"{grazed} trajectories ended early ({', '.join(sorted({r.termination for r in records} - {'time-limit'}))}); their windows are truncated")
    return _aggregate(f"thm3-{mode}", T, constants, results, notes=notes)


def certify_sinai(
    table: BilliardTable,
    ensemble: Sequence[PhasePoint],
    T: float,
    *,
    A: float = 2.0,
    probe: tuple[int, int, float] = (3600, 100, 50.0),
    probe_seed: int = 0,
    h: float = DEFAULT_STEP,
    jobs: int = 1,
    check_cones: bool = True,
) -> Certificate:
    """Sinai-billiard specialization: sequence = collision times.

    ``c`` is the shortest observed free path, ``C`` the longest free time seen
    by the horizon probe or the ensemble, ``m = -2 kappa_max`` clipped to the
    standing bound.  Tables whose probe finds collision-free directions are
    refused with an infinite-horizon verdict.
    """
    if not table.is_flat or table.metric.curvature_override is not None:
        raise CertifyInputError("Sinai mode needs a flat metric")
    dispersing, kappa_max = is_dispersing(table)
    if not dispersing:
        raise CertifyInputError(f"table is not dispersing (largest wall curvature {kappa_max!r})")
    n_dir, n_orig, t_cap = probe
    hp = horizon_probe(table, n_dir, n_orig, t_cap, seed=probe_seed)
    if hp.capped:
        angles = sorted({round(math.degrees(a) % 360.0, 6) for _, _, a in hp.capped})
        witness = {
            "capped_samples": len(hp.capped),
            "t_cap": t_cap,
            "examples": [list(map(float, s)) for s in hp.capped[:5]],
            "capped_angles_deg": angles[:16],
        }
        return Certificate(
            INFINITE_HORIZON, "sinai", T, None, witness=witness,
            notes=["horizon probe found collision-free directions; finite horizon is not supported"],
        )
    records = parallel_map(partial(_flow_one, table=table, T=T, h=h), ensemble, jobs)
    paths = np.concatenate([r.free_paths() for r in records] + [np.zeros(0)])
    if len(paths) == 0:
        raise CertifyInputError("no consecutive collisions observed; increase the duration")
    c = float(paths.min())
    C = max(float(paths.max()), hp.max_free_time)
    constants = CriterionConstants(A, -2.0 * kappa_max, c, C, 0.0)
    cert = certify_theorem3(
        table, ensemble, T, constants, mode="collisions", h=h, jobs=jobs, check_cones=check_cones, records=records,
    )
    cert.mode = "sinai"
    cert.notes.append(f"horizon probe: {n_dir} directions x {n_orig} origins, max free time {hp.max_free_time:.6g}")
    cert.notes.append(f"largest wall curvature {kappa_max:.6g}; requested m = {-2.0 * kappa_max:.6g}")
    return cert


# --------------------------------------------------------------------------- geodesic-flow criteria


def _wall_free_metric(obj) -> MetricField:
    if isinstance(obj, BilliardTable):
        if obj.walls:
            raise CertifyInputError("geodesic-flow criteria need a wall-free table")
        return obj.metric
    return obj


@dataclass
class Theorem1Result:
    verdict: str
    margin: float  # smallest terminal u over the samples
    terminal_u: np.ndarray
    blowups: int


def certify_theorem1(metric, ensemble: Sequence[PhasePoint], t0: float, h: float = DEFAULT_STEP) -> Theorem1Result:
    """Riccati solutions from ``u(0) = 0`` must exist on ``[0, t0]`` and end positive."""
    metric = _wall_free_metric(metric)
    if not t0 > 0:
        raise CertifyInputError("t0 must be positive")
    terminal, blown = [], 0
    for p in ensemble:
        p = p.as_float()
        tr = riccati_flight(metric, Segment(0.0, t0, p.position, p.velocity), 0.0, stride=t0, h=h)
        if tr.blowup_times:
            blown += 1
            terminal.append(-math.inf)
        else:
            terminal.append(float(tr.u[-1]))
    terminal = np.array(terminal)
    ok = blown == 0 and bool(np.all(terminal > 0))
    return Theorem1Result(CERTIFIED if ok else NOT_CERTIFIED, float(terminal.min()), terminal, blown)


@dataclass
class Theorem4Result:
    passed: bool
    nonpositive: bool
    max_grid_curvature: float
    worst_integral: float
    integrals: np.ndarray


def curvature_integral(metric: MetricField, point: PhasePoint, t0: float, h: float = DEFAULT_STEP) -> float:
    """``int_0^t0 K(gamma(t)) dt`` along the geodesic, by RK4 quadrature on the integrator grid."""
    if metric.is_flat:
        return metric.curvature(0.0, 0.0) * t0
    p = point.as_float()
    s = p.position + p.velocity
    acc = (0.0,)
    for hh in step_sizes(t0, h):
        s, acc = rk4_step(metric, s, hh, acc, lambda K, e: (K,))
        s, _ = renormalize(metric, s)
    return acc[0]


def check_theorem4_hypothesis(
    metric, ensemble: Sequence[PhasePoint], t0: float, m: float, grid: int = 512, h: float = DEFAULT_STEP
) -> Theorem4Result:
    """Nonpositive curvature on a dense grid and ``int K <= -m`` along every sampled geodesic."""
    metric = _wall_free_metric(metric)
    if metric.curvature_override is not None:
        kmax = float(metric.curvature_override)
    elif metric.is_flat:
        kmax = 0.0
    else:
        kmax = float(metric.curvature_grid(grid).max())
    integrals = np.array([curvature_integral(metric, p, t0, h) for p in ensemble])
    nonpositive = kmax <= 1e-9
    worst = float(integrals.max()) if len(integrals) else math.nan
    passed = nonpositive and bool(np.all(integrals <= -m))
    return Theorem4Result(passed, nonpositive, kmax, worst, integrals)


# --------------------------------------------------------------------------- Lyapunov


@dataclass
class HyperbolicityEstimate:
    exponents: np.ndarray
    mean: float
    stderr: float
    dropped: int
    unstable_directions: list[tuple[float, float]]
    stable_directions: list[tuple[float, float]]
    T: float
    renorm: float

    def summary(self) -> dict:
        return {
            "trajectories": len(self.exponents),
            "dropped": self.dropped,
            "mean": self.mean,
            "stderr": self.stderr,
            "min": float(self.exponents.min()) if len(self.exponents) else None,
            "max": float(self.exponents.max()) if len(self.exponents) else None,
            "T": self.T,
            "renorm": self.renorm,
        }


def _lyapunov_one(point, table, T, renorm, h):
    rec = flow(table, point, T, h=h)
    if rec.termination != "time-limit":
        return None
    tl = TangentTimeline(table, rec)
    v = np.array([1.0, 1.0]) / math.sqrt(2.0)
    total = 0.0
    mats = []
    n = int(math.ceil(T / renorm - 1e-9))
    for k in range(n):
        ta, tb = k * renorm, min((k + 1) * renorm, T)
        A = tl.matrix(ta, tb).as_array()
        mats.append(A)
        v = A @ v
        nv = float(np.linalg.norm(v))
        total += math.log(nv)
        v /= nv
    w = np.array([1.0, -1.0]) / math.sqrt(2.0)
    for A in reversed(mats):
        w = np.linalg.solve(A, w)
        w /= np.linalg.norm(w)
    return total / T, (float(v[0]), float(v[1])), (float(w[0]), float(w[1]))


def lyapunov_estimate(
    table: BilliardTable, ensemble: Sequence[PhasePoint], T: float,
    renorm: float = 1.0, h: float = DEFAULT_STEP, jobs: int = 1,
) -> HyperbolicityEstimate:
    """Maximal exponent by norm growth of a Jacobi vector, renormalized every ``renorm``.

    Trajectories that end early (grazing) are dropped and counted.  The
    stable sample is the backward image of ``(1, -1)`` at time 0.
    """
    if not T > 0 or not renorm > 0:
        raise CertifyInputError("T and renorm must be positive")
    if not ensemble:
        raise CertifyInputError("ensemble is empty")
    out = parallel_map(partial(_lyapunov_one, table=table, T=T, renorm=renorm, h=h), ensemble, jobs)
    kept = [o for o in out if o is not None]
    ex = np.array([o[0] for o in kept])
    mean = float(ex.mean()) if len(ex) else math.nan
    se = float(ex.std(ddof=1) / math.sqrt(len(ex))) if len(ex) > 1 else math.nan
    return HyperbolicityEstimate(
        ex, mean, se, len(out) - len(kept), [o[1] for o in kept], [o[2] for o in kept], T, renorm,
    )
