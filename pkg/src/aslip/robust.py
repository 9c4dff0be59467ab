"""Disturbance-aware planning: several ground-height cases sharing one set-point signal.

Each case is a full three-phase transcription whose ground sits ``d_c`` above
the nominal one, so its contact-frame apex heights are ``y0 - d_c`` and
``yf - d_c``. Every node input of every case is tied to a shared control grid
``U`` on ``T_j = j T_h / (m - 1)``; the horizon ``T_h`` is itself a decision
variable bounded below by every case's total duration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .collocation import (DEFAULT_NODES, MAX_PHASE_DURATION, Assembler, BoundaryConditions,
                          CollocationProblem, DecisionLayout, _require_feasible, add_boundary,
                          add_continuity, add_defects, add_liftoff_guards,
                          add_touchdown_guards, build_min_effort, count_min_effort,
                          effort_terms, phase_specs, touchdown_angle, variable_bounds)
from .errors import InconsistentRetraction, InfeasibleSolution, InvalidParameters
from .interp import ControlGrid, segment_index, setpoint_basis
from .model import IR0, IR0D, IRP, IX, IXD, IY, IYD, NX, Params
from .plan import AngleSchedule, MotionPlan

DEFAULT_DISTURBANCES = (0.10, 0.05, 0.0, -0.05, -0.10)
DEFAULT_GRID_POINTS = 30


@dataclass(frozen=True)
class DisturbanceSet:
    offsets: tuple = DEFAULT_DISTURBANCES

    def __post_init__(self):
        offs = tuple(float(d) for d in self.offsets)
        if not offs:
            raise InvalidParameters("disturbance set is empty")
        if len(set(offs)) != len(offs):
            raise InvalidParameters("disturbance offsets must be distinct")
        if 0.0 not in offs:
            raise InvalidParameters("disturbance set must contain the nominal case 0")
        object.__setattr__(self, "offsets", offs)

    def __len__(self):
        return len(self.offsets)


@dataclass(frozen=True)
class RobustTask:
    bc: BoundaryConditions
    disturbances: DisturbanceSet = DisturbanceSet()
    node_counts: tuple = DEFAULT_NODES
    grid_points: int = DEFAULT_GRID_POINTS
    regularization: float = 0.0

    def __post_init__(self):
        phase_specs(self.node_counts)
        if self.grid_points < 2:
            raise InvalidParameters("control grid needs at least two points")
        if self.regularization < 0:
            raise InvalidParameters("regularization weight must be non-negative")


def count_robust(node_counts: Sequence[int], n_cases: int, grid_points: int) -> tuple[int, int]:
    """Closed-form (variables, constraints) of the robust problem.

    Relative to ``n_cases`` copies of the minimum-effort problem (without its
    input-continuity and set-point periodicity rows, which linking replaces):

    variables   += m + 1                      (control values, horizon)
    constraints += C N                        (one linking row per node)
                 + 2 (C - 1)                  (shared initial set point)
                 + C                          (horizon >= case duration)

    The set-point rows are assembled in closed form (see
    ``_add_setpoint_rows``): 2 per node except the very first, which swaps one
    for one with the trapezoidal set-point defects, join continuity and
    shared-initial rows counted above.
    """
    N = sum(node_counts)
    nv, nc = count_min_effort(node_counts, periodic_setpoint=False)
    nc -= 2  # input continuity rows at the two joins
    return n_cases * nv + grid_points + 1, n_cases * (nc + N) + 2 * (n_cases - 1) + n_cases


def _add_linking(asm: Assembler, lay: DecisionLayout, case: int):
    m = lay.n_grid
    iTh = lay.horizon_index
    iG = lay.grid_indices
    alphas = np.linspace(0.0, 1.0, m)
    node_phase, node_frac, node_u = [], [], []
    for ph in range(3):
        n = lay.node_counts[ph]
        node_phase.extend([ph] * n)
        node_frac.extend(np.linspace(0.0, 1.0, n))
        node_u.extend(lay.input_indices(case, ph))
    node_phase = np.array(node_phase)
    node_frac = np.array(node_frac)
    node_u = np.array(node_u)
    iD = np.array([lay.duration(case, ph) for ph in range(3)])
    N = node_u.size
    rows, cols = [], []
    for k in range(N):
        ph = node_phase[k]
        entries = [node_u[k], *iD[:ph + 1], *iG, iTh]
        rows.extend([k] * len(entries))
        cols.extend(entries)
    rows = np.array(rows)
    cols = np.array(cols)
    # durations preceding each node, used to form node times
    cum = np.zeros((N, 3))
    for ph in range(3):
        cum[node_phase > ph, ph] = 1.0
        cum[node_phase == ph, ph] = node_frac[node_phase == ph]

    def times_and_segments(x):
        t = cum @ x[iD]
        Th = x[iTh]
        T = alphas * Th
        i = segment_index(T, t)
        U = x[iG]
        w = (t - T[i]) / (T[i + 1] - T[i])
        s = (U[i + 1] - U[i]) / (T[i + 1] - T[i])
        return t, Th, i, w, s, U

    def fval(x):
        t, Th, i, w, s, U = times_and_segments(x)
        return x[node_u] - ((1 - w) * U[i] + w * U[i + 1])

    def jval(x):
        t, Th, i, w, s, U = times_and_segments(x)
        out = []
        for k in range(N):
            ph = node_phase[k]
            dD = -s[k] * cum[k, :ph + 1]
            dU = np.zeros(m)
            dU[i[k]] = -(1 - w[k])
            dU[i[k] + 1] = -w[k]
            out.append(np.concatenate([[1.0], dD, dU, [s[k] * t[k] / Th]]))
        return np.concatenate(out)

    asm.add(f"linking[{case}]", N, 0.0, 0.0, rows, cols, fval, jval)


def _node_schedule(lay: DecisionLayout, case: int):
    """Per-node (phase, fraction) and the matrix mapping durations to node times."""
    node_phase = np.concatenate([[ph] * lay.node_counts[ph] for ph in range(3)])
    node_frac = np.concatenate([np.linspace(0.0, 1.0, lay.node_counts[ph]) for ph in range(3)])
    cum = np.zeros((node_phase.size, 3))
    for ph in range(3):
        cum[node_phase > ph, ph] = 1.0
        cum[node_phase == ph, ph] = node_frac[node_phase == ph]
    iD = np.array([lay.duration(case, ph) for ph in range(3)])
    return node_phase, cum, iD


def _add_setpoint_rows(asm: Assembler, lay: DecisionLayout, case: int):
    """Pin every node's (r0, r0d) to the double integral of the shared signal.

    With ``s = t / T_h`` and unit-grid integrals ``P1 = A1 U``, ``P2 = A2 U``::

        r0d(t) = v0 + T_h P1(s)
        r0(t)  = r0_init + v0 t + T_h^2 P2(s)

    ``(r0_init, v0)`` are the first node of case 0. These rows replace the
    trapezoidal set-point defects, the set-point join continuity and the
    shared-initial-set-point rows, one for one, so the constraint count is
    unchanged; unlike the trapezoid they are exact for an input that kinks
    between collocation nodes.
    """
    m = lay.n_grid
    iTh, iG = lay.horizon_index, lay.grid_indices
    a0 = lay.node(0, 0, 0)
    i_r, i_v = a0 + IR0, a0 + IR0D
    node_phase, cum, iD = _node_schedule(lay, case)
    nodes = np.concatenate([lay.state_indices(case, ph)[:, 0] for ph in range(3)])
    if case == 0:
        node_phase, cum, nodes = node_phase[1:], cum[1:], nodes[1:]
    N = nodes.size
    rows, cols = [], []
    for k in range(N):
        ph = node_phase[k]
        r_ent = [nodes[k] + IR0, i_r, i_v, *iD[:ph + 1], *iG, iTh]
        v_ent = [nodes[k] + IR0D, i_v, *iD[:ph + 1], *iG, iTh]
        rows.extend([2 * k] * len(r_ent) + [2 * k + 1] * len(v_ent))
        cols.extend(r_ent + v_ent)

    def parts(x):
        t = cum @ x[iD]
        Th = x[iTh]
        A0, A1, A2 = setpoint_basis(t / Th, m)
        U = x[iG]
        return t, Th, A0, A1, A2, U

    def fval(x):
        t, Th, A0, A1, A2, U = parts(x)
        r0, v0 = x[i_r], x[i_v]
        out = np.empty(2 * N)
        out[0::2] = x[nodes + IR0] - r0 - v0 * t - Th * Th * (A2 @ U)
        out[1::2] = x[nodes + IR0D] - v0 - Th * (A1 @ U)
        return out

    def jval(x):
        t, Th, A0, A1, A2, U = parts(x)
        v0 = x[i_v]
        P0, P1, P2 = A0 @ U, A1 @ U, A2 @ U
        out = []
        for k in range(N):
            c = cum[k, :node_phase[k] + 1]
            out.append(np.concatenate([
                [1.0, -1.0, -t[k]], -(v0 + Th * P1[k]) * c, -Th * Th * A2[k],
                [-(2 * Th * P2[k] - t[k] * P1[k])],
                [1.0, -1.0], -P0[k] * c, -Th * A1[k],
                [-(P1[k] - t[k] / Th * P0[k])],
            ]))
        return np.concatenate(out)

    asm.add(f"setpoint[{case}]", 2 * N, 0.0, 0.0, rows, cols, fval, jval)


@dataclass
class RobustProblem(CollocationProblem):
    task: Optional[RobustTask] = None


def build_robust(task: RobustTask, p: Params = Params(), x0: Optional[np.ndarray] = None,
                 nominal=None, backend: Optional[str] = None) -> RobustProblem:
    """Assemble the stacked disturbance-case problem.

    Without ``x0`` the guess is built from ``nominal`` (a solved
    minimum-effort :class:`CollocationProblem` and its solution vector), which
    is computed here with the default solver backend when absent.
    """
    offsets = task.disturbances.offsets
    task.bc.validate(p, offsets)
    C = len(offsets)
    lay = DecisionLayout(task.node_counts, n_cases=C, n_grid=task.grid_points)
    asm = Assembler(lay.n_var)
    for c, d in enumerate(offsets):
        add_defects(asm, lay, c, p, setpoint="omit")
        add_continuity(asm, lay, c, inputs=False, components=(IX, IY, IXD, IYD, IRP))
        add_touchdown_guards(asm, lay, c)
        add_liftoff_guards(asm, lay, c, p)
        add_boundary(asm, lay, c, task.bc, ground=d)
    for c in range(C):
        _add_setpoint_rows(asm, lay, c)
    for c in range(C):
        _add_linking(asm, lay, c)
    asm.add_linear("horizon", [[(lay.horizon_index, 1.0)] + [(lay.duration(c, ph), -1.0)
                                                             for ph in range(3)]
                               for c in range(C)], 0.0, np.inf)

    lb, ub = variable_bounds(lay, p)
    lb[lay.grid_indices], ub[lay.grid_indices] = -p.a_max, p.a_max
    lb[lay.horizon_index] = sum(lb[lay.duration(0, ph)] for ph in range(3))
    ub[lay.horizon_index] = 3 * MAX_PHASE_DURATION

    eps = task.regularization
    terms = [effort_terms(lay, c) for c in range(C)]

    def objective(x):
        if eps == 0:
            return 0.0
        x = np.asarray(x, dtype=float)
        return eps * sum(v(x) for v, _ in terms)

    def gradient(x):
        g = np.zeros(lay.n_var)
        if eps:
            x = np.asarray(x, dtype=float)
            for _, gi in terms:
                gi(x, g, eps)
        return g

    if x0 is None:
        if nominal is None:
            nominal = solve_nominal(task, p, backend)
        x0 = robust_guess(task, p, *nominal)
    nlp = asm.finish(lb, ub, np.clip(np.asarray(x0, dtype=float), lb, ub), objective, gradient)
    return RobustProblem(nlp, lay, task.bc, p, {"method": "robust"}, task)


def solve_nominal(task: RobustTask, p: Params, backend: Optional[str] = None):
    from .solvers import solve
    prob = build_min_effort(task.bc, p, phase_specs(task.node_counts))
    res = solve(prob.nlp, backend=backend)
    if not res.success:
        raise InfeasibleSolution(f"nominal warm start failed: {res.status.value} {res.message}")
    return prob, res.x


def _signal(prob: CollocationProblem, x):
    """Nominal node inputs and set points as functions of time."""
    times = prob.layout.node_times(x)
    phases = prob.layout.unpack(x)
    T = np.concatenate([times[0], times[1][1:], times[2][1:]])
    U = np.concatenate([phases[0][1], phases[1][1][1:], phases[2][1][1:]])
    S = np.concatenate([phases[0][0], phases[1][0][1:], phases[2][0][1:]])
    return T, U, S


def robust_guess(task: RobustTask, p: Params, nominal: CollocationProblem, x_nom) -> np.ndarray:
    """Replicate the nominal trajectory per case with a re-timed ballistic descent."""
    offsets = task.disturbances.offsets
    C = len(offsets)
    lay = DecisionLayout(task.node_counts, n_cases=C, n_grid=task.grid_points)
    nlay = nominal.layout
    same_nodes = nlay.node_counts == lay.node_counts
    T_nom, U_nom, S_nom = _signal(nominal, x_nom)
    nph = nlay.unpack(x_nom)
    td = nph[0][0][-1]
    x = np.zeros(lay.n_var)
    totals = []
    for c, d in enumerate(offsets):
        fall = max(task.bc.y0 - d - td[IY], 1e-2)
        t1 = math.sqrt(2 * fall / p.g)
        n0 = lay.node_counts[0]
        t = np.linspace(0.0, t1, n0)
        X = np.zeros((n0, NX))
        X[:, IX] = td[IX] - task.bc.xd0 * (t1 - t)
        X[:, IY] = task.bc.y0 - d - 0.5 * p.g * t**2
        X[:, IXD] = task.bc.xd0
        X[:, IYD] = -p.g * t
        X[:, IR0] = np.interp(t, T_nom, S_nom[:, IR0])
        X[:, IR0D] = np.interp(t, T_nom, S_nom[:, IR0D])
        x[lay.state_indices(c, 0)] = X
        x[lay.input_indices(c, 0)] = np.interp(t, T_nom, U_nom)
        x[lay.duration(c, 0)] = t1
        total = t1
        for ph in (1, 2):
            Xn, Un, Dn = nph[ph]
            n = lay.node_counts[ph]
            if not same_nodes:
                s = np.linspace(0.0, 1.0, n)
                sn = np.linspace(0.0, 1.0, Xn.shape[0])
                Xn = np.column_stack([np.interp(s, sn, Xn[:, j]) for j in range(NX)])
                Un = np.interp(s, sn, Un)
            Xn = Xn.copy()
            Xn[:, IY] -= d * np.linspace(0.0, 1.0, n) if ph == 2 else 0.0
            x[lay.state_indices(c, ph)] = Xn
            x[lay.input_indices(c, ph)] = Un
            x[lay.duration(c, ph)] = Dn
            total += Dn
        totals.append(total)
    Th = max(totals)
    x[lay.horizon_index] = Th
    x[lay.grid_indices] = np.interp(np.linspace(0.0, Th, task.grid_points), T_nom, U_nom)
    return x


def extract_robust_plan(solution, problem: RobustProblem, angle_tol: float = 1e-6) -> MotionPlan:
    """Shared control grid plus the per-case touchdown angles as a retraction schedule."""
    x = _require_feasible(solution)
    lay, p, task = problem.layout, problem.params, problem.task
    Th = float(x[lay.horizon_index])
    grid = ControlGrid(np.clip(x[lay.grid_indices], -p.a_max, p.a_max), Th)
    pairs = []
    for c in range(lay.n_cases):
        X_end = x[lay.state_indices(c, 0)][-1]
        pairs.append((float(x[lay.duration(c, 0)]), touchdown_angle(X_end), task.disturbances.offsets[c]))
    pairs.sort()
    times, angles = [], []
    for t, a, _ in pairs:
        if times and abs(t - times[-1]) <= 1e-12:
            if abs(a - angles[-1]) > angle_tol:
                raise InconsistentRetraction(
                    f"two cases touch down at t={t:.6f} with angles {angles[-1]:.6f} and {a:.6f}")
            continue
        times.append(t)
        angles.append(a)
    X0 = x[lay.state_indices(0, 0)][0]
    meta = {"method": "robust", "bc": task.bc.to_dict(),
            "disturbances": list(task.disturbances.offsets),
            "touchdown": [{"offset": d, "time": t, "angle": a} for t, a, d in pairs]}
    return MotionPlan(grid.times, grid.values, float(X0[IR0]), float(X0[IR0D]),
                      AngleSchedule(tuple(times), tuple(angles)), Th, p, meta)
