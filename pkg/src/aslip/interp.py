"""Piecewise-linear interpolation, zero-order hold, and the input-linking constraint.

Segments are left-open/right-closed: a query exactly on an interior knot
belongs to the segment on its left, and both ends extrapolate using the
first/last segment. The linking gradient uses the same convention, so at a
knot it returns the left-segment one-sided derivative.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidGrid


def _check_grid(x, v):
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise InvalidGrid("need at least two sample points")
    if v.shape[0] != x.size:
        raise InvalidGrid(f"{x.size} sample points but {v.shape[0]} values")
    if not np.all(np.diff(x) > 0):
        raise InvalidGrid("sample points must be strictly increasing")
    return x, v


def segment_index(x, xq):
    """Index i of the segment [x_i, x_{i+1}] used for ``xq``, clamped to the end segments."""
    x = np.asarray(x, dtype=float)
    return np.clip(np.searchsorted(x, xq, side="left") - 1, 0, x.size - 2)


def lin_interp(x, v, xq):
    """Linear interpolation with linear extrapolation beyond both ends.

    ``v`` may carry trailing dimensions (shape ``(N, ...)``), which is how the
    gradient code interpolates whole sensitivity rows at once.
    """
    x, v = _check_grid(x, v)
    xq_arr = np.asarray(xq, dtype=float)
    i = segment_index(x, xq_arr)
    w = (xq_arr - x[i]) / (x[i + 1] - x[i])
    if v.ndim > 1:
        w = w.reshape(w.shape + (1,) * (v.ndim - 1))
    out = (1.0 - w) * v[i] + w * v[i + 1]
    return float(out) if out.ndim == 0 else out


def zoh(x, v, xq):
    """Zero-order hold: ``v_i`` on ``(x_i, x_{i+1}]``, ``v_1`` at or below ``x_2``, ``v_N`` above ``x_N``."""
    x, v = _check_grid(x, v)
    i = np.clip(np.searchsorted(x, np.asarray(xq, dtype=float), side="left") - 1, 0, x.size - 1)
    out = v[i]
    return float(out) if np.ndim(out) == 0 else out


def segment_slopes(x, v):
    x, v = _check_grid(x, v)
    return np.diff(v, axis=0) / np.diff(x).reshape((-1,) + (1,) * (v.ndim - 1))


def interp_slope(x, v, xq):
    """d/dxq of :func:`lin_interp`, left-segment at knots."""
    x, v = _check_grid(x, v)
    slopes = segment_slopes(x, v)
    if x.size == 2:  # one segment, constant slope
        out = np.broadcast_to(slopes[0], np.shape(xq) + slopes.shape[1:])
        return float(out) if np.ndim(out) == 0 else out.copy()
    return zoh(x[:-1], slopes, xq)


@dataclass(frozen=True)
class ControlGrid:
    """Evenly spaced control points ``T_j = j*T_h/(m-1)`` with values ``U``."""

    values: np.ndarray
    horizon: float

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.size < 2:
            raise InvalidGrid("control grid needs m >= 2 points")
        if not self.horizon > 0:
            raise InvalidGrid("control grid horizon must be positive")

    @property
    def m(self) -> int:
        return self.values.size

    @property
    def fractions(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.m)

    @property
    def times(self) -> np.ndarray:
        return self.fractions * self.horizon

    def __call__(self, t):
        return lin_interp(self.times, self.values, t)


def linking_constraint(u_k: float, t_k: float, grid: ControlGrid) -> float:
    """Residual ``u_k - LI(T, U, t_k)``; zero when the node input follows the shared signal."""
    return float(u_k - grid(t_k))


def linking_gradient(t_k, T, U, du, dt, dT, dU):
    """Gradient of ``u_k - LI(T, U, t_k)`` with respect to a decision vector y.

    ``du`` and ``dt`` are the gradients of ``u_k`` and ``t_k`` (shape ``(ny,)``),
    ``dT`` and ``dU`` the Jacobians of the control times and values
    (shape ``(m, ny)``). With ``s`` the slope of the active segment::

        grad = du - s*dt + s*LI(T, dT, t_k) - LI(T, dU, t_k)
    """
    T = np.asarray(T, dtype=float)
    s = interp_slope(T, U, t_k)
    return (np.asarray(du, dtype=float) - s * np.asarray(dt, dtype=float)
            + s * lin_interp(T, np.asarray(dT, dtype=float), t_k)
            - lin_interp(T, np.asarray(dU, dtype=float), t_k))


def linking_partials(t_k, grid: ControlGrid):
    """Closed-form partials of the linking residual used by the Jacobian assembly.

    Returns ``(i, dU_i, dU_{i+1}, d t_k, d T_h)`` for the active segment ``i``;
    ``du_k`` is always 1.
    """
    T = grid.times
    i = int(segment_index(T, t_k))
    w = (t_k - T[i]) / (T[i + 1] - T[i])
    s = (grid.values[i + 1] - grid.values[i]) / (T[i + 1] - T[i])
    # T_j = alpha_j * T_h, so LI(T, dT/dT_h, t) = t / T_h exactly.
    return i, -(1.0 - w), -w, -s, s * t_k / grid.horizon


@lru_cache(maxsize=32)
def _knot_integrals(m: int):
    """Rows giving the first and second integrals of the LI signal at each knot."""
    delta = 1.0 / (m - 1)
    eye = np.eye(m)
    C1 = np.zeros((m, m))
    C2 = np.zeros((m, m))
    for i in range(m - 1):
        C1[i + 1] = C1[i] + 0.5 * delta * (eye[i] + eye[i + 1])
        C2[i + 1] = C2[i] + delta * C1[i] + delta**2 * (2 * eye[i] + eye[i + 1]) / 6.0
    C1.flags.writeable = False
    C2.flags.writeable = False
    return C1, C2


def setpoint_basis(s, m: int):
    """Coefficient rows of the LI signal and its first two integrals on a unit grid.

    For knots ``sigma_j = j/(m-1)`` and values ``U``, returns matrices
    ``(A0, A1, A2)`` of shape ``(len(s), m)`` with

        LI(sigma, U, s) = A0 @ U,   int_0^s LI = A1 @ U,   int_0^s int_0^r LI = A2 @ U

    The end segments extend linearly, matching :func:`lin_interp`.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if m < 2:
        raise InvalidGrid("need at least two control points")
    sigma = np.linspace(0.0, 1.0, m)
    delta = 1.0 / (m - 1)
    C1, C2 = _knot_integrals(m)
    i = segment_index(sigma, s)
    tau = (s - sigma[i])[:, None]
    rows = np.arange(s.size)
    A0 = np.zeros((s.size, m))
    A0[rows, i] = 1.0 - tau[:, 0] / delta
    A0[rows, i + 1] = tau[:, 0] / delta
    A1 = C1[i].copy()
    A1[rows, i] += tau[:, 0] - tau[:, 0] ** 2 / (2 * delta)
    A1[rows, i + 1] += tau[:, 0] ** 2 / (2 * delta)
    A2 = C2[i] + C1[i] * tau
    A2[rows, i] += tau[:, 0] ** 2 / 2 - tau[:, 0] ** 3 / (6 * delta)
    A2[rows, i + 1] += tau[:, 0] ** 3 / (6 * delta)
    return A0, A1, A2
