"""ASLIP point-mass running model: parameters, states, dynamics, guards, resets.

All quantities are nondimensional (mass, max set-point length, gravity).
State vectors are ordered ``(x, y, xdot, ydot, r0, r0dot, rp)``; the array
functions below operate on the trailing axis so collocation code can evaluate
many nodes at once.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import InconsistentTouchdown, InvalidParameters, SingularState

NX = 7
IX, IY, IXD, IYD, IR0, IR0D, IRP = range(NX)

SINGULAR_R = 1e-9


class Mode(enum.IntEnum):
    FLIGHT_DESCENT = 0
    STANCE = 1
    FLIGHT_ASCENT = 2

    @property
    def is_flight(self) -> bool:
        return self is not Mode.STANCE


@dataclass(frozen=True)
class Params:
    m: float = 1.0
    l0: float = 1.0
    g: float = 1.0
    k: float = 20.0
    b: float = 0.89
    a_max: float = 5.0

    def __post_init__(self):
        for name in ("m", "l0", "g", "k", "a_max"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidParameters(f"{name} must be positive, got {v}")
        if not (math.isfinite(self.b) and self.b >= 0):
            raise InvalidParameters(f"b must be non-negative, got {self.b}")

    @property
    def r0_min(self) -> float:
        return 0.5 * self.l0

    @property
    def r0_max(self) -> float:
        return self.l0

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class State:
    x: float
    y: float
    xdot: float
    ydot: float
    r0: float
    r0dot: float
    rp: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_array()):
            raise ValueError(f"non-finite state {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.xdot, self.ydot, self.r0, self.r0dot, self.rp])

    @classmethod
    def from_array(cls, a) -> "State":
        return cls(*(float(v) for v in np.asarray(a, dtype=float)[:NX]))

    @property
    def r(self) -> float:
        return math.hypot(self.x, self.y)

    @property
    def rdot(self) -> float:
        r = self.r
        if r < SINGULAR_R:
            raise SingularState("leg length is zero")
        return (self.x * self.xdot + self.y * self.ydot) / r

    def replace(self, **kw) -> "State":
        return replace(self, **kw)


@dataclass(frozen=True)
class Deriv:
    x: float
    y: float
    xdot: float
    ydot: float
    r0: float
    r0dot: float
    rp: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.xdot, self.ydot, self.r0, self.r0dot, self.rp])

    @classmethod
    def from_array(cls, a) -> "Deriv":
        return cls(*(float(v) for v in a))


# -- array kernels ---------------------------------------------------------

def _leg_geometry(s):
    x, y = s[..., IX], s[..., IY]
    r = np.hypot(x, y)
    if np.any(r < SINGULAR_R):
        raise SingularState("leg length below singularity threshold")
    rdot = (x * s[..., IXD] + y * s[..., IYD]) / r
    return r, rdot


def flight_rhs(s, u, p: Params):
    """Flight derivative for an array of states (..., 7) and inputs (...)."""
    if p.b == 0:
        raise InvalidParameters("flight spring relaxation needs b > 0")
    s = np.asarray(s, dtype=float)
    f = np.zeros_like(s)
    f[..., IX] = s[..., IXD]
    f[..., IY] = s[..., IYD]
    f[..., IYD] = -p.g
    f[..., IR0] = s[..., IR0D]
    f[..., IR0D] = u
    f[..., IRP] = -(p.k / p.b) * s[..., IRP]
    return f


def flight_rhs_jac(s, u, p: Params):
    """Partials of :func:`flight_rhs`: (df/ds of shape (...,7,7), df/du of shape (...,7))."""
    s = np.asarray(s, dtype=float)
    A = np.zeros(s.shape + (NX,))
    A[..., IX, IXD] = 1.0
    A[..., IY, IYD] = 1.0
    A[..., IR0, IR0D] = 1.0
    A[..., IRP, IRP] = -p.k / p.b
    B = np.zeros(s.shape)
    B[..., IR0D] = 1.0
    return A, B


def leg_force_arr(s, p: Params):
    s = np.asarray(s, dtype=float)
    r, rdot = _leg_geometry(s)
    return p.k * (s[..., IR0] - r) + p.b * (s[..., IR0D] - rdot)


def leg_force_grad(s, p: Params):
    """Gradient of the leg force with respect to the 7 state entries."""
    s = np.asarray(s, dtype=float)
    x, y, xd, yd = s[..., IX], s[..., IY], s[..., IXD], s[..., IYD]
    r, rdot = _leg_geometry(s)
    G = np.zeros(s.shape)
    # d r/dx = x/r ; d rdot/dx = xd/r - rdot*x/r^2
    G[..., IX] = -p.k * x / r - p.b * (xd / r - rdot * x / r**2)
    G[..., IY] = -p.k * y / r - p.b * (yd / r - rdot * y / r**2)
    G[..., IXD] = -p.b * x / r
    G[..., IYD] = -p.b * y / r
    G[..., IR0] = p.k
    G[..., IR0D] = p.b
    return G


def stance_rhs(s, u, p: Params):
    s = np.asarray(s, dtype=float)
    r, rdot = _leg_geometry(s)
    F = p.k * (s[..., IR0] - r) + p.b * (s[..., IR0D] - rdot)
    f = np.zeros_like(s)
    f[..., IX] = s[..., IXD]
    f[..., IY] = s[..., IYD]
    f[..., IXD] = s[..., IX] * F / (p.m * r)
    f[..., IYD] = s[..., IY] * F / (p.m * r) - p.g
    f[..., IR0] = s[..., IR0D]
    f[..., IR0D] = u
    f[..., IRP] = rdot - s[..., IR0D]
    return f


def stance_rhs_jac(s, u, p: Params):
    s = np.asarray(s, dtype=float)
    x, y, xd, yd = s[..., IX], s[..., IY], s[..., IXD], s[..., IYD]
    r, rdot = _leg_geometry(s)
    F = p.k * (s[..., IR0] - r) + p.b * (s[..., IR0D] - rdot)
    dF = leg_force_grad(s, p)
    # gradients of r and rdot
    dr = np.zeros(s.shape)
    dr[..., IX] = x / r
    dr[..., IY] = y / r
    drd = np.zeros(s.shape)
    drd[..., IX] = xd / r - rdot * x / r**2
    drd[..., IY] = yd / r - rdot * y / r**2
    drd[..., IXD] = x / r
    drd[..., IYD] = y / r

    A = np.zeros(s.shape + (NX,))
    A[..., IX, IXD] = 1.0
    A[..., IY, IYD] = 1.0
    A[..., IR0, IR0D] = 1.0
    # xdd = x F / (m r)
    inv = 1.0 / (p.m * r)
    for row, c in ((IXD, x), (IYD, y)):
        A[..., row, :] = (c * inv)[..., None] * dF - (c * F * inv / r)[..., None] * dr
    A[..., IXD, IX] += F * inv
    A[..., IYD, IY] += F * inv
    A[..., IRP, :] = drd
    A[..., IRP, IR0D] -= 1.0
    B = np.zeros(s.shape)
    B[..., IR0D] = 1.0
    return A, B


def rhs(mode: Mode, s, u, p: Params):
    return stance_rhs(s, u, p) if mode is Mode.STANCE else flight_rhs(s, u, p)


def rhs_jac(mode: Mode, s, u, p: Params):
    return stance_rhs_jac(s, u, p) if mode is Mode.STANCE else flight_rhs_jac(s, u, p)


# -- State-level operations -------------------------------------------------

def flight_deriv(s: State, u: float, p: Params) -> Deriv:
    return Deriv.from_array(flight_rhs(s.as_array(), u, p))


def stance_deriv(s: State, u: float, p: Params) -> Deriv:
    return Deriv.from_array(stance_rhs(s.as_array(), u, p))


def leg_force(s: State, p: Params) -> float:
    """Axial leg force ``k(r0 - r) + b(r0dot - rdot)`` with the foot at the origin."""
    return float(leg_force_arr(s.as_array(), p))


def touchdown_guard(s: State) -> float:
    """Distance from foot-frame origin minus free leg length; zero at touchdown."""
    return math.hypot(s.x, s.y) - (s.r0 + s.rp)


def liftoff_guard(s: State, p: Params) -> float:
    return leg_force(s, p)


def touchdown_reset(s_world: State, leg_angle: float, ground_y: float,
                    tol: float = 1e-6) -> State:
    """Express a world-frame flight state in the frame of its new contact point.

    ``leg_angle`` is measured from vertical, positive with the foot ahead of
    the body. Velocities are continuous (massless leg, no impact).
    """
    L = s_world.r0 + s_world.rp
    foot_y = s_world.y - L * math.cos(leg_angle)
    if abs(foot_y - ground_y) > tol:
        raise InconsistentTouchdown(
            f"foot height {foot_y:.3e} is off the ground {ground_y:.3e} by more than {tol:g}")
    return s_world.replace(x=-L * math.sin(leg_angle), y=L * math.cos(leg_angle))


def contact_point(s_world: State, leg_angle: float, ground_y: float) -> tuple[float, float]:
    L = s_world.r0 + s_world.rp
    return s_world.x + L * math.sin(leg_angle), ground_y


def liftoff_reset(s_contact: State, contact_world: tuple[float, float]) -> State:
    cx, cy = contact_world
    return s_contact.replace(x=s_contact.x + cx, y=s_contact.y + cy)


def stance_energy(s, p: Params):
    """Body kinetic + potential + spring energy for stance states (..., 7)."""
    s = np.asarray(s, dtype=float)
    r = np.hypot(s[..., IX], s[..., IY])
    return (0.5 * p.m * (s[..., IXD] ** 2 + s[..., IYD] ** 2) + p.m * p.g * s[..., IY]
            + 0.5 * p.k * (r - s[..., IR0]) ** 2)
