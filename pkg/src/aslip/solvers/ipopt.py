"""IPOPT (through casadi) with the problem's own sparse first derivatives.

casadi only serves as the carrier of the compiled IPOPT library: objective,
constraints and their derivatives are Python callbacks, and the Lagrangian
Hessian is IPOPT's limited-memory quasi-Newton approximation.
"""
from __future__ import annotations

import casadi as ca
import numpy as np
import scipy.sparse as sp

from ..nlp import NlpProblem
from . import SolverOptions, finalize

_SUCCESS = {"Solve_Succeeded", "Solved_To_Acceptable_Level"}
_LIMIT = {"Maximum_Iterations_Exceeded", "Maximum_CpuTime_Exceeded"}


class _Jacobian(ca.Callback):
    def __init__(self, name, fn, n, n_out, csc_pattern, order):
        ca.Callback.__init__(self)
        self._fn, self._n, self._n_out = fn, n, n_out
        self._pattern, self._order = csc_pattern, order
        self.construct(name, {})

    def get_n_in(self):
        return 2

    def get_n_out(self):
        return 1

    def get_sparsity_in(self, i):
        return ca.Sparsity.dense(self._n, 1) if i == 0 else ca.Sparsity(self._n_out, 1)

    def get_sparsity_out(self, i):
        return self._pattern

    def eval(self, arg):
        vals = self._fn(np.asarray(arg[0]).ravel())
        nz = np.bincount(self._order, weights=vals, minlength=self._pattern.nnz())
        return [ca.DM(self._pattern, nz)]


class _Function(ca.Callback):
    def __init__(self, name, fn, jac_fn, n, n_out, rows, cols):
        ca.Callback.__init__(self)
        self._fn, self._n, self._n_out = fn, n, n_out
        # map triplets onto casadi's column-compressed, duplicate-free layout
        key = sp.csc_matrix((np.arange(1, rows.size + 1, dtype=float), (rows, cols)),
                            shape=(n_out, n))
        key.sum_duplicates()
        key.sort_indices()
        pos = sp.csc_matrix((np.arange(key.nnz, dtype=float), key.indices, key.indptr),
                            shape=key.shape).tocoo()
        lookup = {(int(r), int(c)): int(v) for r, c, v in zip(pos.row, pos.col, pos.data)}
        order = np.array([lookup[(int(r), int(c))] for r, c in zip(rows, cols)], dtype=int)
        pattern = ca.Sparsity(n_out, n, key.indptr.tolist(), key.indices.tolist())
        self._pattern = pattern
        self._jac = _Jacobian(name + "_jac", jac_fn, n, n_out, pattern, order)
        self.construct(name, {})

    def get_n_in(self):
        return 1

    def get_n_out(self):
        return 1

    def get_sparsity_in(self, i):
        return ca.Sparsity.dense(self._n, 1)

    def get_sparsity_out(self, i):
        return ca.Sparsity.dense(self._n_out, 1)

    def eval(self, arg):
        return [np.atleast_1d(self._fn(np.asarray(arg[0]).ravel()))]

    def has_jacobian(self, *args):
        return True

    def has_jac_sparsity(self, oind, iind):
        return True

    def get_jac_sparsity(self, oind, iind, symmetric):
        return self._pattern

    def get_jacobian(self, name, inames, onames, opts):
        return self._jac


def solve_ipopt(problem: NlpProblem, opts: SolverOptions):
    n, m = problem.n, problem.m
    f = _Function("f", problem.objective, problem.gradient, n, 1,
                  np.zeros(n, dtype=int), np.arange(n))
    g = _Function("g", problem.constraints, problem.jac_values, n, m,
                  problem.jac_rows, problem.jac_cols)
    x = ca.MX.sym("x", n)
    ipopt_opts = {
        "tol": opts.optimality_tol,
        "constr_viol_tol": opts.constraint_tol,
        "acceptable_constr_viol_tol": opts.constraint_tol,
        "max_iter": opts.max_iter,
        "hessian_approximation": "limited-memory",
        "print_level": min(12, 5 * opts.verbosity) if opts.verbosity else 0,
        "sb": "yes",
        "mu_strategy": "adaptive",
    }
    solver = ca.nlpsol("aslip", "ipopt", {"x": x, "f": f(x), "g": g(x)},
                       {"ipopt": ipopt_opts, "print_time": False, "verbose": False})
    res = solver(x0=np.clip(problem.x0, problem.x_lb, problem.x_ub),
                 lbx=problem.x_lb, ubx=problem.x_ub, lbg=problem.c_lb, ubg=problem.c_ub)
    stats = solver.stats()
    status = stats.get("return_status", "")
    iters = int(stats.get("iter_count", 0))
    return finalize(problem, np.asarray(res["x"]).ravel(), status in _SUCCESS, iters, opts,
                    "ipopt", status, status in _LIMIT)
