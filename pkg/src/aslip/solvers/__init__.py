"""Solver boundary: options, results, and backend dispatch.

Backends are selected by name, by the ``ASLIP_SOLVER`` environment variable,
or automatically (IPOPT through casadi when importable, else the built-in
augmented-Lagrangian solver).
"""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass

import numpy as np

from ..nlp import NlpProblem


class SolveStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    ITERATION_LIMIT = "IterationLimit"
    ERROR = "Error"


@dataclass(frozen=True)
class SolverOptions:
    constraint_tol: float = 1e-6
    optimality_tol: float = 1e-6
    max_iter: int = 3000
    verbosity: int = 0

    def __post_init__(self):
        if self.constraint_tol <= 0 or self.optimality_tol <= 0:
            raise ValueError("solver tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class SolveResult:
    status: SolveStatus
    x: np.ndarray
    violation: float
    iterations: int
    objective: float = float("nan")
    backend: str = ""
    message: str = ""

    @property
    def success(self) -> bool:
        return self.status in (SolveStatus.OPTIMAL, SolveStatus.FEASIBLE)


class EvaluationError(RuntimeError):
    pass


def checked(problem: NlpProblem) -> NlpProblem:
    """Wrap evaluators so non-finite output raises instead of propagating NaN."""

    def guard(name, fn):
        def inner(x):
            out = fn(x)
            if not np.all(np.isfinite(out)):
                raise EvaluationError(f"{name} returned non-finite values")
            return out
        return inner

    return NlpProblem(problem.x_lb, problem.x_ub, problem.x0, problem.c_lb, problem.c_ub,
                      guard("objective", problem.objective), guard("gradient", problem.gradient),
                      guard("constraints", problem.constraints), problem.jac_rows,
                      problem.jac_cols, guard("jacobian", problem.jac_values), problem.row_labels)


def finalize(problem: NlpProblem, x, converged: bool, iterations: int, opts: SolverOptions,
             backend: str, message: str = "", hit_limit: bool = False) -> SolveResult:
    """Classify a backend's answer with an independent constraint evaluation."""
    x = np.clip(np.asarray(x, dtype=float), problem.x_lb, problem.x_ub)
    try:
        viol = problem.violation(x)
        obj = float(problem.objective(x))
    except Exception as exc:  # evaluator fault at the returned point
        return SolveResult(SolveStatus.ERROR, x, float("inf"), iterations, backend=backend,
                           message=f"{message}; evaluation failed: {exc}")
    if not np.isfinite(viol):
        status = SolveStatus.ERROR
    elif viol <= opts.constraint_tol:
        status = SolveStatus.OPTIMAL if converged else SolveStatus.FEASIBLE
    elif hit_limit:
        status = SolveStatus.ITERATION_LIMIT
    else:
        status = SolveStatus.INFEASIBLE
    return SolveResult(status, x, viol, iterations, obj, backend, message)


def available_backends() -> list[str]:
    names = ["auglag", "slsqp", "trust-constr"]
    try:
        import casadi  # noqa: F401
        names.insert(0, "ipopt")
    except ImportError:
        pass
    return names


def default_backend() -> str:
    env = os.environ.get("ASLIP_SOLVER")
    if env:
        return env
    return "ipopt" if "ipopt" in available_backends() else "auglag"


def solve(problem: NlpProblem, opts: SolverOptions | None = None,
          backend: str | None = None) -> SolveResult:
    """Solve ``problem`` to a local solution; failures come back as statuses, not exceptions."""
    opts = opts or SolverOptions()
    name = backend or default_backend()
    wrapped = checked(problem)
    try:
        if name == "auglag":
            from .auglag import solve_auglag
            return solve_auglag(wrapped, opts)
        if name in ("slsqp", "trust-constr"):
            from .scipy_backend import solve_scipy
            return solve_scipy(wrapped, opts, name)
        if name == "ipopt":
            from .ipopt import solve_ipopt
            return solve_ipopt(wrapped, opts)
    except EvaluationError as exc:
        return SolveResult(SolveStatus.ERROR, np.asarray(problem.x0, dtype=float), float("inf"), 0,
                           backend=name, message=str(exc))
    raise ValueError(f"unknown solver backend {name!r}; available: {available_backends()}")


__all__ = ["SolveStatus", "SolverOptions", "SolveResult", "solve", "available_backends",
           "default_backend", "finalize"]
