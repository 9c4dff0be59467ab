"""Three-phase trapezoidal direct collocation of the apex-to-apex half cycle.

Every phase stores its node states and inputs in the frame of the upcoming
(or current) foot contact point, so the touchdown and liftoff frame changes
are identities and phase joins reduce to plain equality of node states. The
touchdown angle is therefore implicit in the final descent-node position.

Variable layout of one case (``N = sum(node_counts)``)::

    [ phase 0 nodes | phase 1 nodes | phase 2 nodes | D0 D1 D2 ]

with 8 entries per node: the 7 states followed by the set-point acceleration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InfeasibleSolution, InvalidParameters
from .model import (IR0, IR0D, IRP, IX, IXD, IY, IYD, NX, Mode, Params, State,
                    flight_rhs_jac, leg_force_arr, leg_force_grad, rhs, rhs_jac,
                    stance_rhs_jac)
from .nlp import NlpProblem
from .plan import FixedTarget, MotionPlan

NODE_WIDTH = NX + 1
PHASE_MODES = (Mode.FLIGHT_DESCENT, Mode.STANCE, Mode.FLIGHT_ASCENT)
DEFAULT_NODES = (30, 50, 30)
H_MIN = 1e-3
MAX_PHASE_DURATION = 3.0
Y_MIN = 0.1

# generous finite boxes keep random interior points meaningful
_STATE_LB = np.array([-5.0, Y_MIN, -10.0, -10.0, np.nan, -10.0, -1.0])
_STATE_UB = np.array([5.0, 5.0, 10.0, 10.0, np.nan, 10.0, 1.0])


@dataclass(frozen=True)
class PhaseSpec:
    mode: Mode
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise InvalidParameters("each phase needs at least two nodes")


def phase_specs(node_counts: Sequence[int] = DEFAULT_NODES) -> tuple:
    if len(node_counts) != 3:
        raise InvalidParameters("exactly three phases: descent, stance, ascent")
    return tuple(PhaseSpec(mode, int(n)) for mode, n in zip(PHASE_MODES, node_counts))


@dataclass(frozen=True)
class BoundaryConditions:
    y0: float
    xd0: float
    yf: float
    xdf: float

    def validate(self, p: Params, ground_offsets=(0.0,)):
        vals = (self.y0, self.xd0, self.yf, self.xdf)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidParameters("boundary conditions must be finite")
        for d in ground_offsets:
            if min(self.y0, self.yf) - d <= p.r0_min:
                raise InvalidParameters(
                    f"apex height above ground must exceed {p.r0_min} (ground offset {d})")

    def to_dict(self):
        return {"y0": self.y0, "xd0": self.xd0, "yf": self.yf, "xdf": self.xdf}


@dataclass
class DecisionLayout:
    """Index bookkeeping for one or more stacked three-phase cases."""

    node_counts: tuple
    n_cases: int = 1
    n_grid: int = 0  # control-grid values appended after the cases (robust problem)

    def __post_init__(self):
        self.node_counts = tuple(int(n) for n in self.node_counts)
        self.n_nodes = sum(self.node_counts)
        self.case_size = NODE_WIDTH * self.n_nodes + 3
        self.phase_start = np.concatenate([[0], np.cumsum(self.node_counts)[:-1]]).astype(int)
        self.grid_offset = self.n_cases * self.case_size
        self.horizon_index = self.grid_offset + self.n_grid if self.n_grid else None
        self.n_var = self.grid_offset + (self.n_grid + 1 if self.n_grid else 0)

    def node(self, case: int, phase: int, k: int) -> int:
        """Index of the first state entry of a node."""
        n = self.node_counts[phase]
        if not -n <= k < n:
            raise IndexError(k)
        k %= n
        return case * self.case_size + NODE_WIDTH * (self.phase_start[phase] + k)

    def state(self, case, phase, k) -> slice:
        i = self.node(case, phase, k)
        return slice(i, i + NX)

    def input(self, case, phase, k) -> int:
        return self.node(case, phase, k) + NX

    def duration(self, case, phase) -> int:
        return case * self.case_size + NODE_WIDTH * self.n_nodes + phase

    def state_indices(self, case, phase) -> np.ndarray:
        base = self.node(case, phase, 0)
        n = self.node_counts[phase]
        return base + NODE_WIDTH * np.arange(n)[:, None] + np.arange(NX)[None, :]

    def input_indices(self, case, phase) -> np.ndarray:
        return self.node(case, phase, 0) + NX + NODE_WIDTH * np.arange(self.node_counts[phase])

    @property
    def grid_indices(self) -> np.ndarray:
        return self.grid_offset + np.arange(self.n_grid)

    def unpack(self, x, case: int = 0):
        """Per-phase ``(states (n,7), inputs (n,), duration)`` of one case."""
        x = np.asarray(x)
        return [(x[self.state_indices(case, p)], x[self.input_indices(case, p)],
                 float(x[self.duration(case, p)])) for p in range(3)]

    def node_times(self, x, case: int = 0):
        """Cumulative node times per phase."""
        out, t0 = [], 0.0
        for p in range(3):
            D = float(x[self.duration(case, p)])
            out.append(t0 + np.linspace(0.0, D, self.node_counts[p]))
            t0 += D
        return out


# -- standalone operations ---------------------------------------------------

def trapezoid_defect(xk, xk1, uk, uk1, h, mode: Mode, p: Params):
    """Trapezoidal residual ``x_{k+1} - x_k - h/2 (f_k + f_{k+1})`` and its partials.

    Returns ``(residual, partials)`` where ``partials`` maps ``"xk"``, ``"xk1"``
    (7x7), ``"uk"``, ``"uk1"`` and ``"h"`` (7-vectors).
    """
    if not h > 0:
        raise InvalidParameters("node spacing must be positive")
    a = np.asarray(xk.as_array() if isinstance(xk, State) else xk, dtype=float)
    b = np.asarray(xk1.as_array() if isinstance(xk1, State) else xk1, dtype=float)
    fa, fb = rhs(mode, a, uk, p), rhs(mode, b, uk1, p)
    Aa, Ba = rhs_jac(mode, a, uk, p)
    Ab, Bb = rhs_jac(mode, b, uk1, p)
    res = b - a - 0.5 * h * (fa + fb)
    eye = np.eye(NX)
    return res, {
        "xk": -eye - 0.5 * h * Aa,
        "xk1": eye - 0.5 * h * Ab,
        "uk": -0.5 * h * Ba,
        "uk1": -0.5 * h * Bb,
        "h": -0.5 * (fa + fb),
    }


def trapezoid_weights(n: int) -> np.ndarray:
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return w


def objective_effort(inputs: Sequence, durations: Sequence):
    """Trapezoidal integral of squared set-point acceleration over all phases.

    ``inputs`` holds one node-input array per phase and ``durations`` the phase
    durations. Returns ``(J, grads)`` with ``grads`` a list of
    ``(dJ/du per node, dJ/dD)`` per phase.
    """
    J = 0.0
    grads = []
    for u, D in zip(inputs, durations):
        u = np.asarray(u, dtype=float)
        if D <= 0:
            raise InvalidParameters("phase durations must be positive")
        h = D / (u.size - 1)
        w = trapezoid_weights(u.size)
        J += h * float(np.sum(w * u**2))
        grads.append((2.0 * h * w * u, float(np.sum(w * u**2)) / (u.size - 1)))
    return J, grads


# -- structural sparsity -------------------------------------------------------

def _state_mask(mode: Mode) -> np.ndarray:
    probe = np.array([0.3, 0.9, 0.7, -0.4, 0.95, 0.2, 0.01])
    A, _ = stance_rhs_jac(probe, 0.0, Params()) if mode is Mode.STANCE else flight_rhs_jac(probe, 0.0, Params())
    mask = A != 0
    if mode is Mode.STANCE:
        # entries that vanish only at special points of the probe
        mask[IXD, :IRP] = True
        mask[IYD, :IRP] = True
    return mask | np.eye(NX, dtype=bool)


_MASKS = {mode: _state_mask(mode) for mode in PHASE_MODES}
_F_COLS = np.array([IX, IY, IXD, IYD, IR0, IR0D])


# -- assembly ---------------------------------------------------------------

class Assembler:
    """Collects constraint blocks with fixed triplet patterns."""

    def __init__(self, n_var: int):
        self.n_var = n_var
        self.blocks = []
        self.m = 0
        self.labels = []

    def add(self, label, n_rows, lb, ub, rows, cols, fval, jval):
        rows = np.asarray(rows, dtype=int) + self.m
        self.blocks.append((np.asarray(cols, dtype=int), rows, fval, jval,
                            np.broadcast_to(np.asarray(lb, dtype=float), (n_rows,)).copy(),
                            np.broadcast_to(np.asarray(ub, dtype=float), (n_rows,)).copy()))
        self.labels.extend([label] * n_rows)
        self.m += n_rows

    def add_linear(self, label, coeff_rows, lb, ub):
        """Rows given as lists of ``(col, coef)``."""
        rows, cols, vals = [], [], []
        for r, terms in enumerate(coeff_rows):
            for c, v in terms:
                rows.append(r)
                cols.append(c)
                vals.append(v)
        cols_a, vals_a, rows_a = np.array(cols, dtype=int), np.array(vals, dtype=float), np.array(rows, dtype=int)
        n_rows = len(coeff_rows)

        def fval(x):
            return np.bincount(rows_a, weights=vals_a * x[cols_a], minlength=n_rows)

        self.add(label, n_rows, lb, ub, rows_a, cols_a, fval, lambda x: vals_a)

    def finish(self, x_lb, x_ub, x0, objective, gradient) -> NlpProblem:
        rows = np.concatenate([b[1] for b in self.blocks])
        cols = np.concatenate([b[0] for b in self.blocks])
        c_lb = np.concatenate([b[4] for b in self.blocks])
        c_ub = np.concatenate([b[5] for b in self.blocks])
        blocks = self.blocks

        def constraints(x):
            x = np.asarray(x, dtype=float)
            return np.concatenate([b[2](x) for b in blocks])

        def jac_values(x):
            x = np.asarray(x, dtype=float)
            return np.concatenate([np.asarray(b[3](x), dtype=float) for b in blocks])

        return NlpProblem(x_lb, x_ub, x0, c_lb, c_ub, objective, gradient, constraints,
                          rows, cols, jac_values, self.labels)


SETPOINT_ROWS = ("trapezoid", "exact", "omit")


def add_defects(asm: Assembler, lay: DecisionLayout, case: int, p: Params,
                setpoint: str = "exact"):
    """Defect rows of one case.

    ``setpoint`` selects the treatment of the set-point double integrator:
    ``"trapezoid"`` keeps the plain trapezoidal rows, ``"exact"`` replaces the
    r0 row by the exact update for a piecewise-linear input
    (``r0' = r0 + h r0d + h^2 (2u + u')/6``; the trapezoidal r0d row is already
    exact), and ``"omit"`` drops both rows for callers that pin the set point
    in closed form.
    """
    if setpoint not in SETPOINT_ROWS:
        raise InvalidParameters(f"unknown set-point treatment {setpoint!r}")
    keep = [i for i in range(NX) if setpoint != "omit" or i not in (IR0, IR0D)]
    row_of = -np.ones(NX, dtype=int)
    row_of[keep] = np.arange(len(keep))
    nk = len(keep)
    exact = setpoint == "exact"
    for ph, mode in enumerate(PHASE_MODES):
        n = lay.node_counts[ph]
        iX = lay.state_indices(case, ph)
        iU = lay.input_indices(case, ph)
        iD = lay.duration(case, ph)
        P_i, P_j = np.nonzero(_MASKS[mode])
        npairs = n - 1
        k = np.arange(npairs)
        comp = np.concatenate([np.tile(P_i, npairs), np.tile(P_i, npairs),
                               np.full(npairs, IR0D), np.full(npairs, IR0D),
                               np.tile(np.arange(NX), npairs)])
        pair = np.concatenate([np.repeat(k, P_i.size), np.repeat(k, P_i.size), k, k,
                               np.repeat(k, NX)])
        cols = np.concatenate([
            iX[:-1][:, P_j].ravel(), iX[1:][:, P_j].ravel(),
            iU[:-1], iU[1:],
            np.full(npairs * NX, iD),
        ])
        if exact:
            comp = np.concatenate([comp, np.full(2 * npairs, IR0)])
            pair = np.concatenate([pair, k, k])
            cols = np.concatenate([cols, iU[:-1], iU[1:]])
        sel = row_of[comp] >= 0
        rows = (nk * pair + row_of[comp])[sel]
        cols = cols[sel]
        eyeP = (P_i == P_j).astype(float)
        # r0 row entries of the state blocks (exact variant rewrites them)
        r0_rows = P_i == IR0

        def fval(x, iX=iX, iU=iU, iD=iD, mode=mode, n=n):
            X, U, D = x[iX], x[iU], x[iD]
            f = rhs(mode, X, U, p)
            h = D / (n - 1)
            res = X[1:] - X[:-1] - 0.5 * h * (f[:-1] + f[1:])
            if exact:
                res[:, IR0] = (X[1:, IR0] - X[:-1, IR0] - h * X[:-1, IR0D]
                               - h * h * (2 * U[:-1] + U[1:]) / 6.0)
            return res[:, keep].ravel()

        def jval(x, iX=iX, iU=iU, iD=iD, mode=mode, n=n, P_i=P_i, P_j=P_j, eyeP=eyeP,
                 r0_rows=r0_rows, sel=sel):
            X, U, D = x[iX], x[iU], x[iD]
            h = D / (n - 1)
            f = rhs(mode, X, U, p)
            A, B = rhs_jac(mode, X, U, p)
            Ap = A[:, P_i, P_j]
            Jk = -eyeP - 0.5 * h * Ap[:-1]
            Jk1 = eyeP - 0.5 * h * Ap[1:]
            dh = -0.5 * (f[:-1] + f[1:])
            parts_u = [-0.5 * h * B[:-1, IR0D], -0.5 * h * B[1:, IR0D]]
            if exact:
                # exact row: d/dr0_k = -1, d/dr0d_k = -h, no dependence on x_{k+1} except r0
                Jk[:, r0_rows] = np.where(P_j[r0_rows] == IR0, -1.0,
                                          np.where(P_j[r0_rows] == IR0D, -h, 0.0))
                Jk1[:, r0_rows] = np.where(P_j[r0_rows] == IR0, 1.0, 0.0)
                dh[:, IR0] = -X[:-1, IR0D] - h * (2 * U[:-1] + U[1:]) / 3.0
            out = [Jk.ravel(), Jk1.ravel(), *parts_u, (dh / (n - 1)).ravel()]
            if exact:
                out += [np.full(n - 1, -h * h / 3.0), np.full(n - 1, -h * h / 6.0)]
            return np.concatenate(out)[sel]

        asm.add(f"defect[{case},{ph}]", npairs * nk, 0.0, 0.0, rows, cols, fval, jval)


def add_touchdown_guards(asm: Assembler, lay: DecisionLayout, case: int):
    """Equality at the last descent node, non-negativity (still airborne) before it."""
    iX = lay.state_indices(case, 0)
    n = iX.shape[0]
    gc = [IX, IY, IR0, IRP]
    rows = np.repeat(np.arange(n), 4)
    cols = iX[:, gc].ravel()
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    ub[-1] = 0.0

    def fval(x):
        X = x[iX]
        return np.hypot(X[:, IX], X[:, IY]) - X[:, IR0] - X[:, IRP]

    def jval(x):
        X = x[iX]
        r = np.hypot(X[:, IX], X[:, IY])
        one = np.ones(n)
        return np.column_stack([X[:, IX] / r, X[:, IY] / r, -one, -one]).ravel()

    asm.add(f"touchdown[{case}]", n, lb, ub, rows, cols, fval, jval)


def add_liftoff_guards(asm: Assembler, lay: DecisionLayout, case: int, p: Params):
    """Zero leg force at the last stance node, non-negative force before it."""
    iX = lay.state_indices(case, 1)
    n = iX.shape[0]
    rows = np.repeat(np.arange(n), _F_COLS.size)
    cols = iX[:, _F_COLS].ravel()
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    ub[-1] = 0.0

    def fval(x):
        return leg_force_arr(x[iX], p)

    def jval(x):
        return leg_force_grad(x[iX], p)[:, _F_COLS].ravel()

    asm.add(f"liftoff[{case}]", n, lb, ub, rows, cols, fval, jval)


def add_continuity(asm: Assembler, lay: DecisionLayout, case: int, inputs: bool,
                   components: Optional[Sequence[int]] = None):
    """Equality of the node entries at both phase joins.

    ``components`` defaults to all states (plus the input when ``inputs``).
    """
    if components is None:
        components = list(range(NX)) + ([NX] if inputs else [])
    rows = []
    for ph in (0, 1):
        a, b = lay.node(case, ph, -1), lay.node(case, ph + 1, 0)
        rows.extend([[(a + i, 1.0), (b + i, -1.0)] for i in components])
    asm.add_linear(f"continuity[{case}]", rows, 0.0, 0.0)


def add_boundary(asm: Assembler, lay: DecisionLayout, case: int, bc: BoundaryConditions,
                 ground: float = 0.0):
    s0 = lay.node(case, 0, 0)
    sf = lay.node(case, 2, -1)
    rows = [[(s0 + IY, 1.0)], [(s0 + IXD, 1.0)], [(s0 + IYD, 1.0)], [(s0 + IRP, 1.0)],
            [(sf + IY, 1.0)], [(sf + IXD, 1.0)], [(sf + IYD, 1.0)]]
    target = np.array([bc.y0 - ground, bc.xd0, 0.0, 0.0, bc.yf - ground, bc.xdf, 0.0])
    asm.add_linear(f"boundary[{case}]", rows, target, target)


def add_setpoint_periodicity(asm: Assembler, lay: DecisionLayout, case: int):
    """Set point returns to its apex position and velocity at the final apex."""
    s0, sf = lay.node(case, 0, 0), lay.node(case, 2, -1)
    rows = [[(sf + IR0, 1.0), (s0 + IR0, -1.0)], [(sf + IR0D, 1.0), (s0 + IR0D, -1.0)]]
    asm.add_linear(f"periodic[{case}]", rows, 0.0, 0.0)


def variable_bounds(lay: DecisionLayout, p: Params):
    lb = np.empty(lay.n_var)
    ub = np.empty(lay.n_var)
    slb, sub = _STATE_LB.copy(), _STATE_UB.copy()
    slb[IR0], sub[IR0] = p.r0_min, p.r0_max
    for c in range(lay.n_cases):
        for ph in range(3):
            iX = lay.state_indices(c, ph)
            lb[iX], ub[iX] = slb, sub
            iU = lay.input_indices(c, ph)
            lb[iU], ub[iU] = -p.a_max, p.a_max
            iD = lay.duration(c, ph)
            lb[iD] = H_MIN * (lay.node_counts[ph] - 1)
            ub[iD] = MAX_PHASE_DURATION
    return lb, ub


def effort_terms(lay: DecisionLayout, case: int):
    """Objective evaluator pieces (value, gradient-accumulate) for one case."""
    iUs = [lay.input_indices(case, ph) for ph in range(3)]
    iDs = [lay.duration(case, ph) for ph in range(3)]

    def value(x):
        return objective_effort([x[i] for i in iUs], [x[i] for i in iDs])[0]

    def grad_into(x, g, scale=1.0):
        _, grads = objective_effort([x[i] for i in iUs], [x[i] for i in iDs])
        for iU, iD, (gu, gD) in zip(iUs, iDs, grads):
            g[iU] += scale * gu
            g[iD] += scale * gD

    return value, grad_into


# -- initial guess -----------------------------------------------------------

STANCE_PERIOD_FRACTION = 0.5


def _passive_guess_arcs(bc: BoundaryConditions, p: Params, ground: float = 0.0):
    """Simulate a passive bounce (r0 = l0, zero input) from the apex.

    Returns the recorded trajectory, touchdown/liftoff times, the contact
    point and the ascent duration.
    """
    from .sim import SimConfig, simulate_step  # local: sim imports plan only

    t_stance = STANCE_PERIOD_FRACTION * 2 * math.pi * math.sqrt(p.m / p.k)
    L = p.r0_max
    sin_phi = min(0.6, 0.5 * bc.xd0 * t_stance / L)
    phi = math.asin(sin_phi)
    drop = max(bc.y0 - ground - L * math.cos(phi), 1e-3)
    t1 = math.sqrt(2 * drop / p.g)
    target = bc.xd0 * t1 + L * sin_phi
    plan = MotionPlan(np.array([0.0, 20.0]), np.zeros(2), p.r0_max, 0.0,
                      FixedTarget(target), 20.0, p)
    from .model import State as _S
    apex = _S(0.0, bc.y0, bc.xd0, 0.0, p.r0_max, 0.0, 0.0)
    out = simulate_step(plan, apex, ground, SimConfig(rtol=1e-9, atol=1e-11, max_time=20.0),
                        record=True)
    kinds = [e.kind for e in out.events]
    if "touchdown" not in kinds:
        raise InfeasibleSolution(f"passive guess never touched down ({out.status.value})")
    t_td = out.events[kinds.index("touchdown")].time
    if "liftoff" in kinds:
        t_lo = out.events[kinds.index("liftoff")].time
    else:
        t_lo = t_td + t_stance
    contact = (target, ground)
    return out, t_td, t_lo, contact


def initial_guess(bc: BoundaryConditions, p: Params, node_counts=DEFAULT_NODES,
                  ground: float = 0.0) -> np.ndarray:
    """Deterministic single-case guess in the collocation layout.

    Ballistic descent from the apex, a passive spring bounce at ``r0 = l0``,
    then ballistic ascent; all states in the contact frame, inputs zero.
    """
    lay = DecisionLayout(node_counts)
    out, t_td, t_lo, (cx, cy) = _passive_guess_arcs(bc, p, ground)
    traj = out.trajectory
    x = np.zeros(lay.n_var)

    def put(ph, ts, states):
        st = states.copy()
        st[:, IX] -= cx
        st[:, IY] -= cy
        x[lay.state_indices(0, ph)] = st

    ts0 = np.linspace(0.0, t_td, node_counts[0])
    s0, _, _ = traj.sample(ts0)
    s0[:, IRP] = 0.0
    put(0, ts0, s0)
    x[lay.duration(0, 0)] = t_td

    ts1 = np.linspace(t_td, t_lo, node_counts[1])
    s1, _, _ = traj.sample(np.minimum(ts1, traj.t_end))
    s1[:, IRP] = np.hypot(s1[:, IX] - cx, s1[:, IY] - cy) - s1[:, IR0]
    put(1, ts1, s1)
    x[lay.duration(0, 1)] = t_lo - t_td

    # ballistic ascent from the last stance node
    lo = s1[-1]
    vy = lo[IYD]
    D2 = vy / p.g if vy > 0.05 * math.sqrt(p.g * p.l0) else 0.1
    tau = np.linspace(0.0, D2, node_counts[2])
    s2 = np.tile(lo, (tau.size, 1))
    s2[:, IX] += lo[IXD] * tau
    s2[:, IY] += vy * tau - 0.5 * p.g * tau**2
    s2[:, IYD] = vy - p.g * tau
    s2[:, IRP] = lo[IRP] * np.exp(-(p.k / p.b) * tau)
    put(2, tau, s2)
    x[lay.duration(0, 2)] = D2
    lb, ub = variable_bounds(lay, p)
    return np.clip(x, lb, ub)


# -- problem builder ---------------------------------------------------------

@dataclass
class CollocationProblem:
    nlp: NlpProblem
    layout: DecisionLayout
    bc: BoundaryConditions
    params: Params
    meta: dict = field(default_factory=dict)


def build_min_effort(bc: BoundaryConditions, p: Params = Params(),
                     phases: Optional[Sequence[PhaseSpec]] = None,
                     x0: Optional[np.ndarray] = None,
                     periodic_setpoint: bool = True) -> CollocationProblem:
    """Minimum-effort apex-to-apex problem for a single case on flat ground.

    With ``periodic_setpoint`` the set point must end the half cycle where it
    started; without it a constant-velocity extension replaces the damper
    losses at zero acceleration cost and the objective degenerates.
    """
    phases = phases or phase_specs()
    if tuple(ph.mode for ph in phases) != PHASE_MODES:
        raise InvalidParameters("phases must be descent, stance, ascent in order")
    bc.validate(p)
    node_counts = tuple(ph.n for ph in phases)
    lay = DecisionLayout(node_counts)
    asm = Assembler(lay.n_var)
    add_defects(asm, lay, 0, p)
    add_continuity(asm, lay, 0, inputs=True)
    add_touchdown_guards(asm, lay, 0)
    add_liftoff_guards(asm, lay, 0, p)
    add_boundary(asm, lay, 0, bc)
    if periodic_setpoint:
        add_setpoint_periodicity(asm, lay, 0)
    lb, ub = variable_bounds(lay, p)
    value, grad_into = effort_terms(lay, 0)

    def gradient(x):
        g = np.zeros(lay.n_var)
        grad_into(np.asarray(x, dtype=float), g)
        return g

    if x0 is None:
        x0 = initial_guess(bc, p, node_counts)
    nlp = asm.finish(lb, ub, np.asarray(x0, dtype=float), lambda x: value(np.asarray(x, dtype=float)),
                     gradient)
    return CollocationProblem(nlp, lay, bc, p, {"method": "min-effort"})


def count_min_effort(node_counts: Sequence[int], periodic_setpoint: bool = True) -> tuple[int, int]:
    """Closed-form (variables, constraints) of the minimum-effort problem.

    variables   = 8 N + 3
    constraints = 7 (N - 3) defects + 16 continuity + n0 + n1 guards + 7 boundary
                  (+ 2 set-point periodicity)
    """
    N = sum(node_counts)
    m = NX * (N - 3) + 2 * NODE_WIDTH + node_counts[0] + node_counts[1] + 7
    return NODE_WIDTH * N + 3, m + (2 if periodic_setpoint else 0)


# -- plan extraction ---------------------------------------------------------

def _require_feasible(solution):
    from .solvers import SolveStatus
    status = getattr(solution, "status", None)
    if status not in (SolveStatus.OPTIMAL, SolveStatus.FEASIBLE):
        raise InfeasibleSolution(f"refusing to extract a plan from a {status} solution")
    return np.asarray(solution.x, dtype=float)


def touchdown_angle(state_row) -> float:
    """Leg angle from vertical implied by a contact-frame touchdown state."""
    return math.atan2(-state_row[IX], state_row[IY])


def extract_plan(solution, problem: CollocationProblem) -> MotionPlan:
    """Motion plan from a solved minimum-effort problem.

    Node inputs at cumulative node times form the control grid (duplicate
    join nodes dropped); the touchdown policy aims at the solved foot location.
    """
    x = _require_feasible(solution)
    lay, p = problem.layout, problem.params
    times = lay.node_times(x)
    phases = lay.unpack(x)
    T = np.concatenate([times[0], times[1][1:], times[2][1:]])
    U = np.concatenate([phases[0][1], phases[1][1][1:], phases[2][1][1:]])
    U = np.clip(U, -p.a_max, p.a_max)
    X0 = phases[0][0][0]
    target = -X0[IX]
    meta = {"method": "min-effort", "bc": problem.bc.to_dict(),
            "touchdown_angle": touchdown_angle(phases[0][0][-1])}
    return MotionPlan(T - T[0], U, float(X0[IR0]), float(X0[IR0D]), FixedTarget(float(target)),
                      float(T[-1] - T[0]), p, meta)
