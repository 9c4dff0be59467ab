"""Event-detecting hybrid simulation of one apex-to-apex half cycle.

The body and spring deflection are integrated with an adaptive 8(5,3)
Runge-Kutta stepper (scipy's DOP853); the set point is not integrated but
read from the plan's closed-form trajectory. Guards are sampled inside every
accepted step and crossings are refined by bisection on the step's dense
output.
"""
from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import DOP853

from .errors import IntegrationError, NoEvent
from .model import Params, State
from .plan import FixedTarget, MotionPlan

# integrated vector: body (x, y, xdot, ydot) and spring deflection rp
_X, _Y, _XD, _YD, _RP = range(5)
_SAMPLES_PER_STEP = 4


class Status(str, enum.Enum):
    APEX_REACHED = "ApexReached"
    FELL_IN_STANCE = "FellInStance"
    FELL_IN_FLIGHT = "FellInFlight"
    NEGATIVE_LIFTOFF = "NegativeLiftoff"
    TIMEOUT = "Timeout"


@dataclass(frozen=True)
class SimConfig:
    rtol: float = 1e-8
    atol: float = 1e-10
    event_tol: float = 1e-10
    max_time: float = 10.0
    # flight is polynomial, so without a cap the stepper strides over guards
    # that cross twice within one step
    max_step: float = 0.05

    def __post_init__(self):
        if min(self.rtol, self.atol, self.event_tol, self.max_time, self.max_step) <= 0:
            raise ValueError("simulation tolerances and max_time must be positive")


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    state: State


@dataclass
class Piece:
    mode: str
    t0: float
    t1: float
    dense: Callable
    offset: tuple


@dataclass
class Trajectory:
    """Recorded dense output of a simulation, sampled in the world frame."""

    plan: MotionPlan
    pieces: list = field(default_factory=list)

    @property
    def t_end(self) -> float:
        return self.pieces[-1].t1 if self.pieces else 0.0

    def sample(self, ts):
        """World-frame states (len(ts), 7), the mode of each sample, and leg force."""
        ts = np.asarray(ts, dtype=float)
        out = np.empty((ts.size, 7))
        modes = []
        force = np.zeros(ts.size)
        p = self.plan.params
        for j, t in enumerate(ts):
            piece = self._piece(t)
            z = piece.dense(t)
            r0, r0d = self.plan.setpoint(t)
            cx, cy = piece.offset
            out[j] = (z[_X] + cx, z[_Y] + cy, z[_XD], z[_YD], r0, r0d, z[_RP])
            modes.append(piece.mode)
            if piece.mode == "stance":
                r = math.hypot(z[_X], z[_Y])
                rdot = (z[_X] * z[_XD] + z[_Y] * z[_YD]) / r
                out[j, 6] = r - r0
                force[j] = p.k * (r0 - r) + p.b * (r0d - rdot)
        return out, modes, force

    def _piece(self, t):
        for piece in self.pieces:
            if t <= piece.t1:
                return piece
        return self.pieces[-1]


@dataclass
class SimOutcome:
    status: Status
    apex: Optional[State]
    events: tuple
    diagnostics: tuple = ()
    trajectory: Optional[Trajectory] = None

    @property
    def ok(self) -> bool:
        return self.status is Status.APEX_REACHED


def locate_event(arc, guard, tol, t_lo=None, t_hi=None, max_iter=200):
    """Bisect a positive-to-nonpositive crossing of ``guard(t, y)`` along ``arc(t)``.

    ``arc`` is a dense-output callable (``t_min``/``t_max`` attributes are used
    when no bracket is given). Returns ``(t*, y*)`` with ``|guard| <= tol``, or
    the tightest post-crossing point when the guard jumps across zero.
    """
    a = arc.t_min if t_lo is None else t_lo
    b = arc.t_max if t_hi is None else t_hi
    ya, yb = arc(a), arc(b)
    ga, gb = guard(a, ya), guard(b, yb)
    if not (ga > 0 >= gb):
        raise NoEvent(f"guard does not cross zero on [{a}, {b}]: {ga:.3e} -> {gb:.3e}")
    if abs(ga) <= tol and ga < abs(gb):
        return a, ya
    for _ in range(max_iter):
        if abs(gb) <= tol:
            break
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        ym = arc(mid)
        gm = guard(mid, ym)
        if gm > 0:
            a, ga = mid, gm
            if abs(gm) <= tol:
                return a, ym
        else:
            b, yb, gb = mid, ym, gm
    return b, yb


class _Setpoint:
    """Fast scalar evaluation of a plan's set point."""

    def __init__(self, plan: MotionPlan):
        self.plan = plan
        self.T = plan.times.tolist()
        self.U = plan.accels.tolist()
        self.S = plan._slopes.tolist()
        self.V = plan._v.tolist()
        self.R = plan._r.tolist()
        self.extrapolated = False

    def __call__(self, t):
        T = self.T
        if t > T[-1] or t < 0:
            self.extrapolated = True
        i = min(max(bisect.bisect_left(T, t) - 1, 0), len(T) - 2)
        tau = t - T[i]
        a, s = self.U[i], self.S[i]
        v = self.V[i] + a * tau + 0.5 * s * tau * tau
        r = self.R[i] + self.V[i] * tau + 0.5 * a * tau * tau + s * tau**3 / 6.0
        return r, v


def _policy_angle(policy, x, y, t, ground_y):
    if isinstance(policy, FixedTarget):
        return math.atan2(policy.target_x - x, y - ground_y)
    return policy(t)


class _Run:
    def __init__(self, plan, ground_y, cfg, record):
        self.plan = plan
        self.p: Params = plan.params
        self.ground = ground_y
        self.cfg = cfg
        self.sp = _Setpoint(plan)
        self.events = []
        self.diag = []
        self.traj = Trajectory(plan) if record else None
        self._bounds_flagged = False

    def world_state(self, t, z, offset=(0.0, 0.0), stance=False):
        r0, r0d = self.sp(t)
        rp = z[_RP]
        if stance:
            rp = math.hypot(z[_X], z[_Y]) - r0
        return State(z[_X] + offset[0], z[_Y] + offset[1], z[_XD], z[_YD], r0, r0d, rp)

    # -- right-hand sides
    def flight_rhs(self, t, z):
        p = self.p
        return np.array([z[_XD], z[_YD], 0.0, -p.g, -(p.k / p.b) * z[_RP]])

    def stance_force(self, t, z):
        p = self.p
        r0, r0d = self.sp(t)
        r = math.hypot(z[_X], z[_Y])
        rdot = (z[_X] * z[_XD] + z[_Y] * z[_YD]) / r
        return p.k * (r0 - r) + p.b * (r0d - rdot), r, rdot, r0d

    def stance_rhs(self, t, z):
        p = self.p
        F, r, rdot, r0d = self.stance_force(t, z)
        c = F / (p.m * r)
        return np.array([z[_XD], z[_YD], z[_X] * c, z[_Y] * c - p.g, rdot - r0d])

    def check_setpoint(self, t):
        r0, _ = self.sp(t)
        p = self.p
        if not self._bounds_flagged and not (p.r0_min - 1e-6 <= r0 <= p.r0_max + 1e-6):
            self._bounds_flagged = True
            self.diag.append(f"set point {r0:.6f} outside [{p.r0_min}, {p.r0_max}] at t={t:.6f}")

    def integrate(self, mode, rhs, t0, z0, guards, offset=(0.0, 0.0)):
        """Advance until the earliest guard crossing; returns (name, t, z) or None on timeout.

        ``guards`` is an ordered list of (name, fn); earlier entries win exact ties.
        """
        cfg = self.cfg
        if t0 >= cfg.max_time:
            return None
        solver = DOP853(rhs, t0, np.asarray(z0, dtype=float), cfg.max_time,
                        rtol=cfg.rtol, atol=cfg.atol, max_step=cfg.max_step)
        prev_t = t0
        prev = [fn(t0, z0) for _, fn in guards]
        while solver.status == "running":
            msg = solver.step()
            if solver.status == "failed":
                raise IntegrationError(f"{mode} integration failed at t={solver.t}: {msg}")
            dense = solver.dense_output()
            if self.traj is not None:
                self.traj.pieces.append(Piece(mode, solver.t_old, solver.t, dense, offset))
            hit = None
            for ts in np.linspace(solver.t_old, solver.t, _SAMPLES_PER_STEP + 1)[1:]:
                zs = dense(ts)
                vals = [fn(ts, zs) for _, fn in guards]
                crossed = [i for i, (va, vb) in enumerate(zip(prev, vals)) if va > 0 >= vb]
                if crossed:
                    roots = []
                    for i in crossed:
                        t_ev, z_ev = locate_event(dense, guards[i][1], cfg.event_tol, prev_t, ts)
                        roots.append((t_ev, i, z_ev))
                    t_ev, i, z_ev = min(roots, key=lambda e: (e[0], e[1]))
                    hit = (guards[i][0], t_ev, z_ev)
                    break
                prev_t, prev = ts, vals
            if hit is not None:
                if self.traj is not None:
                    self.traj.pieces[-1].t1 = hit[1]
                return hit
            self.check_setpoint(solver.t)
        return None

    def finish(self, status, apex=None):
        if self.sp.extrapolated:
            self.diag.append("set point extrapolated beyond the plan horizon")
        return SimOutcome(status, apex, tuple(self.events), tuple(self.diag), self.traj)


def simulate_step(plan: MotionPlan, apex: State, ground_y: float = 0.0,
                  config: SimConfig | None = None, record: bool = False) -> SimOutcome:
    """Run the plan open loop from a world-frame apex state to the next apex.

    The set-point fields of ``apex`` are ignored; the plan supplies them.
    """
    cfg = config or SimConfig()
    run = _Run(plan, ground_y, cfg, record)
    policy = plan.policy
    z0 = np.array([apex.x, apex.y, apex.xdot, apex.ydot, apex.rp])

    def foot_height(t, z):
        r0, _ = run.sp(t)
        L = r0 + z[_RP]
        phi = _policy_angle(policy, z[_X], z[_Y], t, ground_y)
        return z[_Y] - L * math.cos(phi) - ground_y

    def body_height(t, z):
        return z[_Y] - ground_y

    if body_height(0.0, z0) <= 0 or foot_height(0.0, z0) <= 0:
        run.diag.append("apex state starts in contact with the ground")
        return run.finish(Status.FELL_IN_FLIGHT)

    # descending flight
    hit = run.integrate("descent", run.flight_rhs, 0.0, z0,
                        [("fall", body_height), ("touchdown", foot_height)])
    if hit is None:
        return run.finish(Status.TIMEOUT)
    kind, t_td, z = hit
    if kind == "fall":
        run.events.append(Event(t_td, "fall", run.world_state(t_td, z)))
        return run.finish(Status.FELL_IN_FLIGHT)
    s_td = run.world_state(t_td, z)
    run.events.append(Event(t_td, "touchdown", s_td))
    phi = _policy_angle(policy, z[_X], z[_Y], t_td, ground_y)
    L = s_td.r0 + s_td.rp
    contact = (s_td.x + L * math.sin(phi), ground_y)
    # contact frame; the located foot height is within event_tol of the ground
    zc = np.array([-L * math.sin(phi), L * math.cos(phi), z[_XD], z[_YD], z[_RP]])

    # stance
    def force(t, zz):
        return run.stance_force(t, zz)[0]

    def contact_height(t, zz):
        return zz[_Y]

    if force(t_td, zc) <= 0:
        run.diag.append("leg force non-positive at touchdown")
        return run.finish(Status.NEGATIVE_LIFTOFF)
    hit = run.integrate("stance", run.stance_rhs, t_td, zc,
                        [("fall", contact_height), ("liftoff", force)], offset=contact)
    if hit is None:
        return run.finish(Status.TIMEOUT)
    kind, t_lo, z = hit
    s_lo = run.world_state(t_lo, z, contact, stance=True)
    if kind == "fall":
        run.events.append(Event(t_lo, "fall", s_lo))
        return run.finish(Status.FELL_IN_STANCE)
    run.events.append(Event(t_lo, "liftoff", s_lo))
    run.check_setpoint(t_lo)
    if s_lo.ydot <= 0:
        return run.finish(Status.NEGATIVE_LIFTOFF)

    # ascending flight, world frame
    zw = np.array([s_lo.x, s_lo.y, s_lo.xdot, s_lo.ydot, s_lo.rp])

    def vertical_speed(t, zz):
        return zz[_YD]

    hit = run.integrate("ascent", run.flight_rhs, t_lo, zw,
                        [("fall", body_height), ("apex", vertical_speed)])
    if hit is None:
        return run.finish(Status.TIMEOUT)
    kind, t_ap, z = hit
    s_ap = run.world_state(t_ap, z)
    run.events.append(Event(t_ap, kind, s_ap))
    if kind == "fall":
        return run.finish(Status.FELL_IN_FLIGHT)
    return run.finish(Status.APEX_REACHED, s_ap)


def apex_state(plan: MotionPlan, height: float, speed: float, x: float = 0.0) -> State:
    """World-frame apex state with the plan's initial set point and a relaxed spring."""
    return State(x, height, speed, 0.0, plan.r0_init, plan.r0dot_init, 0.0)
