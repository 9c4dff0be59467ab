"""Sparse nonlinear program container and a finite-difference derivative check."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

FD_REL_STEP = 1e-6
ERROR_FLOOR = 1e-8


@dataclass
class NlpProblem:
    """``min f(x)  s.t.  c_lb <= c(x) <= c_ub,  x_lb <= x <= x_ub`` with a fixed Jacobian pattern."""

    x_lb: np.ndarray
    x_ub: np.ndarray
    x0: np.ndarray
    c_lb: np.ndarray
    c_ub: np.ndarray
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    constraints: Callable[[np.ndarray], np.ndarray]
    jac_rows: np.ndarray
    jac_cols: np.ndarray
    jac_values: Callable[[np.ndarray], np.ndarray]
    row_labels: Optional[list] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.x_lb.size

    @property
    def m(self) -> int:
        return self.c_lb.size

    def jacobian(self, x) -> sp.csr_matrix:
        # duplicates in the triplet pattern are summed
        return sp.csr_matrix((self.jac_values(x), (self.jac_rows, self.jac_cols)),
                             shape=(self.m, self.n))

    def violation(self, x) -> float:
        """Max-norm violation of constraint and variable bounds."""
        c = self.constraints(x)
        cv = np.maximum(np.maximum(self.c_lb - c, c - self.c_ub), 0.0)
        bv = np.maximum(np.maximum(self.x_lb - x, x - self.x_ub), 0.0)
        return float(max(cv.max(initial=0.0), bv.max(initial=0.0)))

    def constraint_residuals(self, x) -> np.ndarray:
        c = self.constraints(x)
        return np.maximum(np.maximum(self.c_lb - c, c - self.c_ub), 0.0)


@dataclass
class JacobianCheck:
    max_rel_error: float
    worst: tuple  # (row, col) of the worst Jacobian entry; row -1 means the objective gradient
    gradient_rel_error: float
    pattern_violations: list

    @property
    def ok(self) -> bool:
        return not self.pattern_violations


def _rel_err(a, b, floor=ERROR_FLOOR):
    diff = np.abs(a - b)
    scale = np.maximum(np.abs(a), np.abs(b))
    return np.where(diff <= floor, 0.0, diff / np.maximum(scale, floor))


def check_jacobian(problem: NlpProblem, point, step: float = FD_REL_STEP,
                   pattern_tol: float = 1e-6) -> JacobianCheck:
    """Compare analytical first derivatives against central differences at ``point``.

    Entries whose absolute discrepancy is below 1e-8 count as exact; the rest
    are measured relative to the larger magnitude. Finite-difference entries
    larger than ``pattern_tol`` outside the declared pattern are reported.
    """
    x = np.asarray(point, dtype=float).copy()
    n, m = problem.n, problem.m
    J = problem.jacobian(x).tocsc()
    g = problem.gradient(x)
    declared = set(zip(problem.jac_rows.tolist(), problem.jac_cols.tolist()))
    worst_err, worst = 0.0, (-1, -1)
    fd_grad = np.empty(n)
    violations = []
    for j in range(n):
        h = step * max(abs(x[j]), 1.0)
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        fd_col = (problem.constraints(xp) - problem.constraints(xm)) / (2 * h)
        fd_grad[j] = (problem.objective(xp) - problem.objective(xm)) / (2 * h)
        an_col = J[:, j].toarray().ravel()
        err = _rel_err(an_col, fd_col)
        i = int(np.argmax(err)) if m else 0
        if m and err[i] > worst_err:
            worst_err, worst = float(err[i]), (i, j)
        for r in np.flatnonzero(np.abs(fd_col) > pattern_tol):
            if (int(r), j) not in declared:
                violations.append((int(r), j, float(fd_col[r])))
    gerr = _rel_err(g, fd_grad)
    k = int(np.argmax(gerr))
    if gerr[k] > worst_err:
        worst_err, worst = float(gerr[k]), (-1, k)
    return JacobianCheck(worst_err, worst, float(gerr.max(initial=0.0)), violations)
