"""Independent measurements shared by the unit tests and the acceptance suite."""
import math

import numpy as np
from scipy.integrate import solve_ivp

from aslip.model import IR0, IR0D, IRP, IX, IXD, IY, IYD, Params, State, stance_energy, stance_rhs
from aslip.plan import FixedTarget, MotionPlan
from aslip.sim import SimConfig, simulate_step


def _stance_arc(rng):
    """Random contact-frame stance arc driven by a smooth set-point acceleration."""
    phi = rng.uniform(-0.4, 0.4)
    r0 = rng.uniform(0.85, 1.0)
    L = r0 - rng.uniform(0.0, 0.05)
    s0 = np.array([-L * math.sin(phi), L * math.cos(phi), rng.uniform(0.3, 1.2),
                   rng.uniform(-1.0, -0.2), r0, rng.uniform(-0.5, 0.5), L - r0])
    amp, w, c = rng.uniform(0, 3), rng.uniform(2, 20), rng.uniform(-2, 2)
    return s0, (lambda t: c + amp * math.sin(w * t)), rng.uniform(0.05, 0.2)


def stance_power_residuals(rng, count=20, p=Params()):
    """Relative power-balance residual on ``count`` integrated stance arcs.

    Energy change is compared to actuator work minus damper loss, both
    integrated alongside the state; the scale is the integral of |power|.
    """
    out = []
    for _ in range(count):
        s0, u, T = _stance_arc(rng)

        def f(t, z):
            s = z[:7]
            r = math.hypot(s[IX], s[IY])
            rdot = (s[IX] * s[IXD] + s[IY] * s[IYD]) / r
            F = p.k * (s[IR0] - r) + p.b * (s[IR0D] - rdot)
            power = F * s[IR0D] - p.b * (s[IR0D] - rdot) ** 2
            return np.concatenate([stance_rhs(s, u(t), p), [power, abs(power)]])

        sol = solve_ivp(f, (0, T), np.concatenate([s0, [0.0, 0.0]]), method="DOP853",
                        rtol=1e-12, atol=1e-13)
        if not sol.success:
            raise RuntimeError(sol.message)
        zf = sol.y[:, -1]
        dE = stance_energy(zf[:7], p) - stance_energy(s0, p)
        out.append(abs(dE - zf[7]) / max(zf[8], 1e-12))
    return np.array(out)


def flight_rp_decay_errors(rng, count=20, p=Params(), cfg=SimConfig()):
    """Max deviation of simulated flight rp from rp0 exp(-(k/b) t) on ``count`` arcs."""
    out = []
    for _ in range(count):
        rp0 = rng.uniform(-0.05, 0.05)
        height = rng.uniform(1.3, 2.0)
        plan = MotionPlan(np.array([0.0, 3.0]), np.zeros(2), 0.95, 0.0, FixedTarget(100.0), 3.0, p)
        # the leg points far ahead, so the whole window is descending flight
        apex = State(0.0, height, 0.5, 0.0, 0.95, 0.0, rp0)
        res = simulate_step(plan, apex, 0.0, SimConfig(cfg.rtol, cfg.atol, max_time=0.4),
                            record=True)
        ts = np.linspace(0.0, res.trajectory.t_end, 50)
        states, modes, _ = res.trajectory.sample(ts)
        if set(modes) != {"descent"}:
            raise RuntimeError(f"arc left flight: {set(modes)}")
        out.append(np.max(np.abs(states[:, IRP] - rp0 * np.exp(-(p.k / p.b) * ts))))
    return np.array(out)


def rp_decay_tolerance(cfg=SimConfig()):
    """Integrator-tolerance bound used for the flight decay check."""
    return 100 * (cfg.atol + cfg.rtol * 0.05)
