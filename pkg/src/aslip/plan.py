"""Open-loop motion plans: set-point acceleration grid plus a touchdown-angle policy."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import Fell, InvalidPlan
from .interp import lin_interp, segment_index
from .model import Params

PLAN_FORMAT = "aslip-motion-plan"
PLAN_VERSION = 1
SETPOINT_TOL = 1e-3  # [l0]; bounds are enforced only at collocation nodes


@dataclass(frozen=True)
class FixedTarget:
    """Leg points at a fixed horizontal location on the ground."""

    target_x: float

    def to_dict(self):
        return {"kind": "fixed_target", "target_x": float(self.target_x)}


@dataclass(frozen=True)
class AngleSchedule:
    """Touchdown angle as a function of time, clamped beyond the schedule ends."""

    times: tuple
    angles: tuple

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.size == 0 or t.size != len(self.angles):
            raise InvalidPlan("angle schedule needs matching, non-empty times and angles")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise InvalidPlan("angle schedule times must be strictly increasing")
        object.__setattr__(self, "times", tuple(float(v) for v in self.times))
        object.__setattr__(self, "angles", tuple(float(v) for v in self.angles))

    def __call__(self, t: float) -> float:
        if len(self.times) == 1 or t <= self.times[0]:
            return self.angles[0]
        if t >= self.times[-1]:
            return self.angles[-1]
        return float(np.interp(t, self.times, self.angles))

    def to_dict(self):
        return {"kind": "angle_schedule", "times": list(self.times), "angles": list(self.angles)}


Policy = Union[FixedTarget, AngleSchedule]


def policy_from_dict(d: dict) -> Policy:
    kind = d.get("kind")
    if kind == "fixed_target":
        return FixedTarget(float(d["target_x"]))
    if kind == "angle_schedule":
        return AngleSchedule(tuple(d["times"]), tuple(d["angles"]))
    raise InvalidPlan(f"unknown policy kind {kind!r}")


def leg_angle(policy: Policy, x: float, y: float, t: float, ground_y: float) -> float:
    """Leg angle from vertical (positive = foot ahead) commanded during descent."""
    if isinstance(policy, FixedTarget):
        if y <= ground_y:
            raise Fell("body at or below the ground")
        return math.atan2(policy.target_x - x, y - ground_y)
    return policy(t)


@dataclass(frozen=True, eq=False)
class MotionPlan:
    times: np.ndarray
    accels: np.ndarray
    r0_init: float
    r0dot_init: float
    policy: Policy
    horizon: float
    params: Params = field(default_factory=Params)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        T = np.asarray(self.times, dtype=float)
        U = np.asarray(self.accels, dtype=float)
        object.__setattr__(self, "times", T)
        object.__setattr__(self, "accels", U)
        if T.ndim != 1 or T.size < 2 or T.size != U.size:
            raise InvalidPlan("times and accels must be 1-D, same length >= 2")
        if not np.all(np.diff(T) > 0):
            raise InvalidPlan("plan times must be strictly increasing")
        if abs(T[0]) > 1e-12 or abs(T[-1] - self.horizon) > 1e-9 * max(1.0, self.horizon):
            raise InvalidPlan("plan times must span [0, horizon]")
        if np.any(np.abs(U) > self.params.a_max * (1 + 1e-9)):
            raise InvalidPlan("set-point acceleration exceeds a_max")
        # knot values of the closed-form double integral
        h = np.diff(T)
        s = np.diff(U) / h
        v = np.empty_like(T)
        r = np.empty_like(T)
        v[0], r[0] = self.r0dot_init, self.r0_init
        for i in range(h.size):
            v[i + 1] = v[i] + U[i] * h[i] + 0.5 * s[i] * h[i] ** 2
            r[i + 1] = r[i] + v[i] * h[i] + 0.5 * U[i] * h[i] ** 2 + s[i] * h[i] ** 3 / 6.0
        object.__setattr__(self, "_slopes", s)
        object.__setattr__(self, "_v", v)
        object.__setattr__(self, "_r", r)
        ts = np.linspace(0.0, self.horizon, 20 * T.size + 1)
        r_dense, _ = self.setpoint(np.concatenate([ts, T]))
        p = self.params
        if r_dense.min() < p.r0_min - SETPOINT_TOL * p.l0 or r_dense.max() > p.r0_max + SETPOINT_TOL * p.l0:
            raise InvalidPlan(
                f"set point leaves [{p.r0_min}, {p.r0_max}]: range "
                f"[{r_dense.min():.6f}, {r_dense.max():.6f}]")

    def __eq__(self, other):
        # value equality; meta is bookkeeping and does not take part
        if not isinstance(other, MotionPlan):
            return NotImplemented
        return (np.array_equal(self.times, other.times)
                and np.array_equal(self.accels, other.accels)
                and (self.r0_init, self.r0dot_init, self.policy, self.horizon, self.params)
                == (other.r0_init, other.r0dot_init, other.policy, other.horizon, other.params))

    __hash__ = None

    def setpoint(self, t):
        """Vectorized set-point position and velocity; extrapolates the end segments."""
        t = np.asarray(t, dtype=float)
        i = segment_index(self.times, t)
        tau = t - self.times[i]
        a, s = self.accels[i], self._slopes[i]
        v = self._v[i] + a * tau + 0.5 * s * tau**2
        r = self._r[i] + self._v[i] * tau + 0.5 * a * tau**2 + s * tau**3 / 6.0
        return r, v

    def accel(self, t):
        return lin_interp(self.times, self.accels, t)

    def to_dict(self) -> dict:
        return {
            "format": PLAN_FORMAT,
            "version": PLAN_VERSION,
            "times": [float(v) for v in self.times],
            "accels": [float(v) for v in self.accels],
            "r0_init": float(self.r0_init),
            "r0dot_init": float(self.r0dot_init),
            "policy": self.policy.to_dict(),
            "horizon": float(self.horizon),
            "params": self.params.to_dict(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MotionPlan":
        if d.get("format") != PLAN_FORMAT:
            raise InvalidPlan("not a motion plan document")
        if d.get("version") != PLAN_VERSION:
            raise InvalidPlan(f"unsupported plan version {d.get('version')}")
        try:
            return cls(
                times=np.asarray(d["times"], dtype=float),
                accels=np.asarray(d["accels"], dtype=float),
                r0_init=float(d["r0_init"]),
                r0dot_init=float(d["r0dot_init"]),
                policy=policy_from_dict(d["policy"]),
                horizon=float(d["horizon"]),
                params=Params(**d.get("params", {})),
                meta=d.get("meta", {}),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidPlan(f"malformed plan document: {exc}") from exc

    def dumps(self) -> str:
        # json writes floats with repr, i.e. shortest round-trip (up to 17 digits)
        return json.dumps(self.to_dict(), indent=1)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "MotionPlan":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InvalidPlan(f"{path}: {exc}") from exc
        return cls.from_dict(doc)


def eval_setpoint(plan: MotionPlan, t: float) -> tuple[float, float]:
    r, v = plan.setpoint(t)
    return float(r), float(v)
