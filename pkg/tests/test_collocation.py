import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aslip.collocation import (BoundaryConditions, DecisionLayout, build_min_effort,
                               count_min_effort, extract_plan, initial_guess, objective_effort,
                               phase_specs, trapezoid_defect)
from aslip.errors import InfeasibleSolution, InvalidParameters
from aslip.model import IR0, IR0D, IRP, IX, IY, IYD, Mode, Params, flight_rhs, leg_force_arr
from aslip.nlp import check_jacobian
from aslip.solvers import SolveResult, SolveStatus

from conftest import STEADY, passive_hop_point

P = Params()


# -- trapezoid_defect -----------------------------------------------------------

def test_defect_zero_on_trapezoidal_update(rng):
    # flight dynamics are affine, f = A x + B u + c, so the implicit update is a linear solve
    x0 = np.array([0.1, 1.2, 0.8, -0.3, 0.95, 0.1, 0.02])
    u0, u1, h = 1.5, -0.7, 0.05
    c = flight_rhs(np.zeros(7), 0.0, P)
    A = np.column_stack([flight_rhs(e, 0.0, P) - c for e in np.eye(7)])
    B = flight_rhs(np.zeros(7), 1.0, P) - c
    rhs = x0 + 0.5 * h * (A @ x0 + B * u0 + c + B * u1 + c)
    x1 = np.linalg.solve(np.eye(7) - 0.5 * h * A, rhs)
    res, _ = trapezoid_defect(x0, x1, u0, u1, h, Mode.FLIGHT_DESCENT, P)
    assert np.max(np.abs(res)) <= 1e-14


def test_defect_zero_on_ballistic_arc():
    def arc(t):
        return np.array([0.2 + 0.8 * t, 1.2 - 0.3 * t - 0.5 * t * t, 0.8, -0.3 - t,
                         0.9 + 0.1 * t, 0.1, 0.0])

    for t, h in ((0.0, 0.1), (0.23, 0.05), (0.4, 0.2)):
        res, _ = trapezoid_defect(arc(t), arc(t + h), 0.0, 0.0, h, Mode.FLIGHT_ASCENT, P)
        assert np.max(np.abs(res)) <= 1e-15


@pytest.mark.parametrize("mode", list(Mode))
def test_defect_partials_vs_finite_differences(mode, rng):
    worst = 0.0
    for _ in range(20):
        a = np.array([rng.uniform(-0.4, 0.4), rng.uniform(0.7, 1.1), rng.uniform(-1, 1),
                      rng.uniform(-1, 1), rng.uniform(0.6, 1.0), rng.uniform(-1, 1),
                      rng.uniform(-0.05, 0.05)])
        b = a + rng.uniform(-0.05, 0.05, 7)
        u0, u1, h = rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0.005, 0.05)
        _, J = trapezoid_defect(a, b, u0, u1, h, mode, P)

        def f(a=a, b=b, u0=u0, u1=u1, h=h):
            return trapezoid_defect(a, b, u0, u1, h, mode, P)[0]

        checks = []
        for j in range(7):
            for key, base in (("xk", a), ("xk1", b)):
                s = 1e-6 * max(abs(base[j]), 1.0)
                e = np.zeros(7)
                e[j] = s
                kw = {"a": a + e} if key == "xk" else {"b": b + e}
                kw2 = {"a": a - e} if key == "xk" else {"b": b - e}
                checks.append((J[key][:, j], (f(**kw) - f(**kw2)) / (2 * s)))
        checks.append((J["uk"], (f(u0=u0 + 1e-6) - f(u0=u0 - 1e-6)) / 2e-6))
        checks.append((J["uk1"], (f(u1=u1 + 1e-6) - f(u1=u1 - 1e-6)) / 2e-6))
        checks.append((J["h"], (f(h=h + 1e-8) - f(h=h - 1e-8)) / 2e-8))
        for an, fd in checks:
            diff = np.abs(an - fd)
            rel = np.where(diff <= 1e-8, 0.0, diff / np.maximum(np.abs(fd), 1e-8))
            worst = max(worst, rel.max())
    assert worst <= 1e-6


def test_defect_needs_positive_spacing():
    with pytest.raises(InvalidParameters):
        trapezoid_defect(np.zeros(7), np.zeros(7), 0, 0, 0.0, Mode.STANCE, P)


# -- objective -------------------------------------------------------------------

def test_effort_examples():
    J, _ = objective_effort([np.zeros(3), np.zeros(5), np.zeros(3)], [0.2, 0.3, 0.2])
    assert J == 0.0
    J, _ = objective_effort([np.full(3, 2.0), np.full(5, 2.0), np.full(4, 2.0)], [0.1, 0.25, 0.15])
    assert J == pytest.approx(2.0, abs=1e-14)


def test_effort_gradient(rng):
    u = [rng.uniform(-5, 5, n) for n in (4, 6, 5)]
    D = list(rng.uniform(0.1, 0.5, 3))
    _, grads = objective_effort(u, D)
    for ph in range(3):
        for k in range(u[ph].size):
            h = 1e-6
            up = [v.copy() for v in u]
            dn = [v.copy() for v in u]
            up[ph][k] += h
            dn[ph][k] -= h
            fd = (objective_effort(up, D)[0] - objective_effort(dn, D)[0]) / (2 * h)
            assert grads[ph][0][k] == pytest.approx(fd, rel=1e-8, abs=1e-10)
        Dp, Dm = list(D), list(D)
        Dp[ph] += 1e-6
        Dm[ph] -= 1e-6
        fd = (objective_effort(u, Dp)[0] - objective_effort(u, Dm)[0]) / 2e-6
        assert grads[ph][1] == pytest.approx(fd, rel=1e-8)


@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6), st.floats(0.05, 1.0))
def test_effort_nonnegative(u, D):
    J, _ = objective_effort([np.array(u[:2]), np.array(u[2:4]), np.array(u[4:])], [D, D, D])
    assert J >= 0
    if all(v == 0 or abs(v) > 1e-100 for v in u):  # squares of tinier values underflow
        assert (J == 0) == all(v == 0 for v in u)


# -- problem layout and counts -------------------------------------------------------

def test_counts_hand_count():
    prob = build_min_effort(STEADY, phases=phase_specs((3, 4, 3)))
    # 10 nodes x (7 states + 1 input) + 3 durations
    assert prob.nlp.n == 83
    # defects 7*(2+3+2), continuity 2 joins x 8, touchdown path 3, liftoff path 4,
    # boundary 7 (y0, xd0, yd0, rp0, yf, xdf, ydf), set-point periodicity 2
    assert prob.nlp.m == 49 + 16 + 3 + 4 + 7 + 2 == 81
    assert count_min_effort((3, 4, 3)) == (83, 81)


@pytest.mark.parametrize("nodes", [(2, 2, 2), (5, 9, 4), (15, 25, 15)])
def test_counts_formula(nodes):
    prob = build_min_effort(STEADY, phases=phase_specs(nodes))
    assert (prob.nlp.n, prob.nlp.m) == count_min_effort(nodes)
    assert len(prob.nlp.row_labels) == prob.nlp.m


def test_layout_dense_and_disjoint():
    lay = DecisionLayout((3, 4, 3), n_cases=2, n_grid=5)
    idx = []
    for c in range(2):
        for ph in range(3):
            idx.extend(lay.state_indices(c, ph).ravel())
            idx.extend(lay.input_indices(c, ph))
            idx.append(lay.duration(c, ph))
    idx.extend(lay.grid_indices)
    idx.append(lay.horizon_index)
    assert sorted(idx) == list(range(lay.n_var))


def test_build_rejects_low_apex():
    with pytest.raises(InvalidParameters):
        build_min_effort(BoundaryConditions(0.45, 0.8, 1.1, 0.8))
    with pytest.raises(InvalidParameters):
        phase_specs((3, 1, 3))


def test_initial_guess_deterministic():
    a = initial_guess(STEADY, P, (15, 25, 15))
    b = initial_guess(STEADY, P, (15, 25, 15))
    assert np.array_equal(a, b)


def test_jacobian_at_initial_guess():
    prob = build_min_effort(STEADY, phases=phase_specs((15, 25, 15)))
    chk = check_jacobian(prob.nlp, prob.nlp.x0)
    assert chk.max_rel_error <= 1e-6
    assert not chk.pattern_violations


# -- simulation-seeded feasibility -------------------------------------------------

def test_simulated_arc_is_feasible():
    """A passive hop sampled at fine nodes satisfies every constraint within 1e-6."""
    bc, nodes, x, _ = passive_hop_point()
    prob = build_min_effort(bc, P, phase_specs(nodes), x0=x)
    c = prob.nlp.constraint_residuals(x)
    assert c.max() <= 1e-6, prob.nlp.row_labels[int(np.argmax(c))]
    assert prob.nlp.violation(x) <= 1e-6


# -- solved problem -------------------------------------------------------------------

def test_steady_solution(steady_min):
    prob, res, plan = steady_min
    assert res.status is SolveStatus.OPTIMAL
    assert prob.nlp.violation(res.x) <= 1e-6
    phases = prob.layout.unpack(res.x)
    X_td = phases[0][0][-1]
    X_lo = phases[1][0][-1]
    assert abs(math.hypot(X_td[IX], X_td[IY]) - X_td[IR0] - X_td[IRP]) <= 1e-6
    assert abs(leg_force_arr(X_lo, P)) <= 1e-6
    assert phases[2][0][-1][IYD] == pytest.approx(0.0, abs=1e-6)


def test_extract_plan_bookkeeping(steady_min):
    prob, res, plan = steady_min
    phases = prob.layout.unpack(res.x)
    assert plan.horizon == pytest.approx(sum(D for _, _, D in phases), abs=1e-12)
    assert plan.policy.target_x == pytest.approx(-phases[0][0][0][IX], abs=1e-15)
    times = prob.layout.node_times(res.x)
    for ph in range(3):
        r, v = plan.setpoint(times[ph])
        np.testing.assert_allclose(r, phases[ph][0][:, IR0], atol=1e-4)
        np.testing.assert_allclose(v, phases[ph][0][:, IR0D], atol=1e-4)


def test_extract_refuses_infeasible(steady_min):
    prob, res, _ = steady_min
    bad = SolveResult(SolveStatus.INFEASIBLE, res.x, 1.0, 5)
    with pytest.raises(InfeasibleSolution):
        extract_plan(bad, prob)


def test_refinement_consistency(steady_min, steady_min_small):
    fine = steady_min[1].objective
    coarse = steady_min_small[1].objective
    assert abs(fine - coarse) / fine < 0.01


def test_trapezoid_setpoint_variant_same_counts():
    from aslip.collocation import Assembler, add_defects
    lay = DecisionLayout((4, 5, 4))
    a, b = Assembler(lay.n_var), Assembler(lay.n_var)
    add_defects(a, lay, 0, P, setpoint="trapezoid")
    add_defects(b, lay, 0, P, setpoint="exact")
    assert a.m == b.m
    with pytest.raises(InvalidParameters):
        add_defects(Assembler(lay.n_var), lay, 0, P, setpoint="bogus")


def test_exact_setpoint_row_on_linear_input():
    # r0' = r0 + h r0d + h^2 (2u + u')/6 is exact for a linear input
    from aslip.collocation import Assembler, add_defects
    lay = DecisionLayout((3, 3, 3))
    asm = Assembler(lay.n_var)
    add_defects(asm, lay, 0, P)
    nlp = asm.finish(np.full(lay.n_var, -np.inf), np.full(lay.n_var, np.inf), np.zeros(lay.n_var),
                     lambda x: 0.0, lambda x: np.zeros(lay.n_var))
    x = np.zeros(lay.n_var)
    for ph in (1, 2):
        x[lay.state_indices(0, ph)[:, IY]] = 1.0
        x[lay.duration(0, ph)] = 0.1
    D = 0.4
    a0, a1 = 1.0, -2.0  # u(t) = a0 + a1 t
    t = np.linspace(0, D, 3)
    S = np.zeros((3, 7))
    S[:, IY] = 1.0
    S[:, IR0D] = 0.1 + a0 * t + 0.5 * a1 * t**2
    S[:, IR0] = 0.8 + 0.1 * t + 0.5 * a0 * t**2 + a1 * t**3 / 6
    x[lay.state_indices(0, 0)] = S
    x[lay.input_indices(0, 0)] = a0 + a1 * t
    x[lay.duration(0, 0)] = D
    c = nlp.constraints(x)
    rows = [i for i, l in enumerate(nlp.row_labels) if l == "defect[0,0]"]
    per = np.asarray(c[rows]).reshape(2, 7)
    assert np.max(np.abs(per[:, [IR0, IR0D]])) <= 1e-15
