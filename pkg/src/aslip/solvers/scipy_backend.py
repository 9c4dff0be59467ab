"""Adapters to scipy's SLSQP and trust-constr methods."""
from __future__ import annotations

import numpy as np
from scipy.optimize import Bounds, NonlinearConstraint, minimize

from ..nlp import NlpProblem
from . import SolverOptions, finalize


def solve_scipy(problem: NlpProblem, opts: SolverOptions, method: str):
    bounds = Bounds(problem.x_lb, problem.x_ub)
    x0 = np.clip(problem.x0, problem.x_lb, problem.x_ub)
    if method == "trust-constr":
        con = NonlinearConstraint(problem.constraints, problem.c_lb, problem.c_ub,
                                  jac=problem.jacobian)
        res = minimize(problem.objective, x0, jac=problem.gradient, method="trust-constr",
                       bounds=bounds, constraints=[con],
                       options={"maxiter": opts.max_iter, "gtol": opts.optimality_tol * 1e-2,
                                "xtol": 1e-12, "barrier_tol": opts.optimality_tol * 1e-2,
                                "initial_barrier_parameter": 1e-3,
                                "verbose": opts.verbosity,
                                "sparse_jacobian": True})
        iters = int(res.nit)
    else:
        eq = problem.c_lb == problem.c_ub
        cons = []
        if eq.any():
            ie = np.flatnonzero(eq)
            cons.append({"type": "eq",
                         "fun": lambda x: problem.constraints(x)[ie] - problem.c_lb[ie],
                         "jac": lambda x: problem.jacobian(x)[ie].toarray()})
        lo = np.flatnonzero(~eq & np.isfinite(problem.c_lb))
        hi = np.flatnonzero(~eq & np.isfinite(problem.c_ub))
        if lo.size:
            cons.append({"type": "ineq",
                         "fun": lambda x: problem.constraints(x)[lo] - problem.c_lb[lo],
                         "jac": lambda x: problem.jacobian(x)[lo].toarray()})
        if hi.size:
            cons.append({"type": "ineq",
                         "fun": lambda x: problem.c_ub[hi] - problem.constraints(x)[hi],
                         "jac": lambda x: -problem.jacobian(x)[hi].toarray()})
        res = minimize(problem.objective, x0, jac=problem.gradient, method="SLSQP",
                       bounds=bounds, constraints=cons,
                       options={"maxiter": opts.max_iter, "ftol": opts.optimality_tol * 1e-3,
                                "disp": opts.verbosity > 0})
        iters = int(res.nit)
    hit_limit = iters >= opts.max_iter
    return finalize(problem, res.x, bool(res.success), iters, opts, method,
                    str(res.message), hit_limit)
