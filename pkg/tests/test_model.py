import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aslip.errors import InconsistentTouchdown, InvalidParameters, SingularState
from aslip.model import (IX, IXD, IY, IYD, Mode, Params, State, contact_point, flight_deriv,
                         flight_rhs, flight_rhs_jac, leg_force, liftoff_guard, liftoff_reset,
                         stance_deriv, stance_rhs, stance_rhs_jac, touchdown_guard,
                         touchdown_reset)

from oracles import flight_rp_decay_errors, rp_decay_tolerance, stance_power_residuals

P = Params()
finite = st.floats(-2.0, 2.0, allow_nan=False)


# -- params ------------------------------------------------------------------

def test_param_defaults():
    assert (P.m, P.l0, P.g, P.k, P.b, P.a_max) == (1.0, 1.0, 1.0, 20.0, 0.89, 5.0)
    assert P.r0_min == 0.5 and P.r0_max == 1.0


@pytest.mark.parametrize("kw", [{"m": 0}, {"l0": -1}, {"g": 0}, {"k": 0}, {"b": -0.1},
                                {"a_max": 0}, {"k": float("nan")}])
def test_param_validation(kw):
    with pytest.raises(InvalidParameters):
        Params(**kw)


def test_state_rejects_nonfinite():
    with pytest.raises(ValueError):
        State(0, float("inf"), 0, 0, 1, 0)


# -- flight_deriv ------------------------------------------------------------

def test_flight_ballistic_zero_deflection():
    d = flight_deriv(State(0, 1.2, 0.8, -0.3, 0.95, 0, 0), 0.0, P)
    assert d.ydot == -1.0 and d.xdot == 0.0 and d.rp == 0.0
    assert d.x == 0.8 and d.y == -0.3


def test_flight_spring_relaxation():
    d = flight_deriv(State(0, 1.2, 0.8, -0.3, 0.95, 0, 0.01), 0.0, P)
    assert d.rp == pytest.approx(-0.22472, abs=5e-6)
    assert d.rp == pytest.approx(-(20 / 0.89) * 0.01, rel=1e-14)


@given(finite, finite, finite)
def test_flight_input_identity(u, r0d, y):
    d = flight_deriv(State(0.1, 1 + abs(y), 0.5, 0.1, 0.8, r0d, 0.0), u, P)
    assert d.r0dot == u
    assert d.r0 == r0d


def test_flight_needs_damping():
    with pytest.raises(InvalidParameters):
        flight_deriv(State(0, 1.2, 0, 0, 1, 0), 0.0, Params(b=0.0))


# -- leg_force ---------------------------------------------------------------

def test_leg_force_static_compression():
    assert leg_force(State(0, 0.95, 0, 0, 1.0, 0), P) == pytest.approx(1.0, abs=1e-12)


def test_leg_force_zero_deflection_and_rate():
    s = State(0.3, 0.8, 0.4, -0.2, math.hypot(0.3, 0.8), 0.0)
    s = s.replace(r0dot=s.rdot)
    assert leg_force(s, P) == pytest.approx(0.0, abs=1e-14)


def test_leg_force_damping_only():
    # r = r0 = 1, rdot = -0.5
    assert leg_force(State(0, 1.0, 0, -0.5, 1.0, 0.0), P) == pytest.approx(0.445, abs=1e-12)


def test_leg_force_singular():
    with pytest.raises(SingularState):
        leg_force(State(0, 0, 0, 0, 1, 0), P)


# -- stance_deriv ------------------------------------------------------------

def test_stance_static_balance():
    d = stance_deriv(State(0, 0.95, 0, 0, 1.0, 0), 0.0, P)
    assert d.ydot == pytest.approx(0.0, abs=1e-12)
    assert d.xdot == 0.0


def test_stance_zero_force_is_ballistic():
    s = State(0.2, 0.9, 0.3, -0.1, math.hypot(0.2, 0.9), 0.0)
    s = s.replace(r0dot=s.rdot)
    d = stance_deriv(s, 1.3, P)
    assert d.xdot == pytest.approx(0.0, abs=1e-13)
    assert d.ydot == pytest.approx(-1.0, abs=1e-13)
    assert d.r0dot == 1.3


def test_stance_hand_evaluation():
    d = stance_deriv(State(0.2, 0.9, 0, 0, 1.0, 0), 0.0, P)
    r = math.sqrt(0.85)
    F = 20 * (1 - r)
    # printed hand values round intermediates, hence the loose comparison
    assert F == pytest.approx(1.5610, abs=1e-4)
    assert d.xdot == pytest.approx(0.33864, abs=5e-5)
    assert d.xdot == pytest.approx(0.2 * F / r, rel=1e-14)
    assert d.rp == pytest.approx(0.0)  # rdot - r0dot at rest


def test_stance_singular():
    with pytest.raises(SingularState):
        stance_deriv(State(0, 0, 0, 0, 1, 0), 0.0, P)


# -- guards --------------------------------------------------------------------

def test_touchdown_guard_examples():
    assert touchdown_guard(State(0, 0.95, 0, 0, 0.95, 0, 0)) == pytest.approx(0.0, abs=1e-15)
    assert touchdown_guard(State(0.2, 0.9, 0, 0, 0.95, 0, 0)) == pytest.approx(-0.02805, abs=5e-6)
    assert touchdown_guard(State(0, 3.0, 0, 0, 0.95, 0, 0.01)) > 0


def test_liftoff_guard_examples():
    assert liftoff_guard(State(0, 1.0, 0, 0, 1.0, 0), P) == pytest.approx(0.0, abs=1e-14)
    assert liftoff_guard(State(0, 0.9, 0, 0, 1.0, 0), P) > 0
    assert liftoff_guard(State(0, 1.01, 0, 0, 1.0, 0.5), P) == pytest.approx(0.245, abs=1e-12)


# -- resets --------------------------------------------------------------------

def test_touchdown_reset_vertical():
    s = touchdown_reset(State(1.0, 0.95, 0.8, -0.3, 0.95, 0.1, 0.0), 0.0, 0.0)
    assert (s.x, s.y) == (pytest.approx(0.0), pytest.approx(0.95))


def test_touchdown_reset_angled():
    L, phi = 0.95, 0.3
    w = State(2.0, L * math.cos(phi), 0.8, -0.3, 0.94, 0.2, 0.01)
    s = touchdown_reset(w, phi, 0.0)
    assert s.x == pytest.approx(-0.28072, abs=5e-5)
    assert s.y == pytest.approx(0.90758, abs=5e-5)
    assert s.x == pytest.approx(-L * math.sin(phi), abs=1e-15)
    assert (s.xdot, s.ydot, s.r0, s.r0dot, s.rp) == (w.xdot, w.ydot, w.r0, w.r0dot, w.rp)


@given(st.floats(-0.8, 0.8), st.floats(0.6, 1.0), finite, finite)
def test_touchdown_reset_velocities_pass_through(phi, L, xd, yd):
    w = State(0.0, L * math.cos(phi) + 0.2, xd, yd, L, 0.0, 0.0)
    s = touchdown_reset(w, phi, 0.2)
    assert (s.xdot, s.ydot) == (xd, yd)
    assert touchdown_guard(s) == pytest.approx(0.0, abs=1e-12)


def test_touchdown_reset_inconsistent():
    with pytest.raises(InconsistentTouchdown):
        touchdown_reset(State(0, 1.5, 0, 0, 0.95, 0), 0.0, 0.0)


def test_liftoff_reset_examples():
    s = State(-0.1, 0.97, 0.9, 0.4, 0.96, 0.1, 0.01)
    assert liftoff_reset(s, (0.0, 0.0)) == s
    t = liftoff_reset(s, (2.0, 0.1))
    assert t.x == pytest.approx(1.9) and t.y == pytest.approx(1.07)
    assert t.rp == s.rp


def test_reset_round_trip():
    w = State(0.5, 1.1, 0.8, -0.4, 0.95, 0.0, 0.0)
    phi = math.acos((1.1 - 0.3) / 0.95)
    c = touchdown_reset(w, phi, 0.3)
    back = liftoff_reset(c, contact_point(w, phi, 0.3))
    np.testing.assert_allclose(back.as_array(), w.as_array(), atol=1e-14)


# -- invariants ----------------------------------------------------------------

stance_states = st.tuples(st.floats(-0.5, 0.5), st.floats(0.6, 1.0), finite, finite,
                          st.floats(0.5, 1.0), finite, st.just(0.0))


@given(st.tuples(finite, st.floats(0.5, 3), finite, finite), st.tuples(finite, finite, finite),
       st.floats(-5, 5), st.floats(-5, 5))
def test_flight_decoupling(body, extra, u1, u2):
    a = np.array([*body, *extra])
    b = np.array([*body, extra[0] + 0.3, -extra[1], extra[2] / 2])
    fa, fb = flight_rhs(a, u1, P), flight_rhs(b, u2, P)
    assert np.array_equal(fa[:4], fb[:4])


@given(st.floats(-1, 1), st.floats(0.5, 1.0))
def test_guard_consistency(phi, r0):
    s = State(-r0 * math.sin(phi), r0 * math.cos(phi), 0, 0, r0, 0, 0.0)
    assert abs(touchdown_guard(s)) < 1e-14
    assert s.r == pytest.approx(r0, rel=1e-15)


@given(stance_states, st.floats(-0.3, 0.3))
def test_leg_force_linear_in_r0(s, delta):
    s = State(*s)
    df = leg_force(s.replace(r0=s.r0 + delta), P) - leg_force(s, P)
    assert df == pytest.approx(P.k * delta, abs=1e-12)
    dv = leg_force(s.replace(r0dot=s.r0dot + delta), P) - leg_force(s, P)
    assert dv == pytest.approx(P.b * delta, abs=1e-12)


@given(stance_states, st.floats(-5, 5))
def test_stance_force_direction(s, u):
    a = np.array(s)
    f = stance_rhs(a, u, P)
    cross = f[IXD] * a[IY] - (f[IYD] + P.g) * a[IX]
    assert abs(cross) <= 1e-12


@given(stance_states, st.floats(-5, 5))
@settings(max_examples=50)
def test_rhs_jacobians_match_finite_differences(s, u):
    a = np.array(s)
    for fn, jac in ((stance_rhs, stance_rhs_jac), (flight_rhs, flight_rhs_jac)):
        A, B = jac(a, u, P)
        h = 1e-6
        for j in range(7):
            e = np.zeros(7)
            e[j] = h
            fd = (fn(a + e, u, P) - fn(a - e, u, P)) / (2 * h)
            np.testing.assert_allclose(A[:, j], fd, rtol=1e-6, atol=1e-7)
        fdu = (fn(a, u + h, P) - fn(a, u - h, P)) / (2 * h)
        np.testing.assert_allclose(B, fdu, atol=1e-8)


# -- energy suite --------------------------------------------------------------

def test_stance_power_balance_energy_suite(rng):
    """Energy change along 20 integrated stance arcs equals actuator work minus damper loss."""
    res = stance_power_residuals(rng, 20, P)
    assert res.size == 20 and res.max() <= 1e-6, res.max()


def test_flight_rp_decay_energy_suite(rng):
    """Spring deflection in simulated flight decays as rp0 exp(-(k/b) t) on 20 random arcs."""
    err = flight_rp_decay_errors(rng, 20, P)
    assert err.size == 20 and err.max() <= rp_decay_tolerance(), err.max()


def test_mode_order():
    assert [m.name for m in Mode] == ["FLIGHT_DESCENT", "STANCE", "FLIGHT_ASCENT"]
    assert Mode.STANCE.is_flight is False
