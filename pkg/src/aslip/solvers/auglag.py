"""Built-in augmented-Lagrangian fallback.

Inequality rows get slack variables so the constraints become ``h(z) = 0``
with ``z = (x, s)`` boxed. Each outer iteration minimizes

    Phi(z) = f(x) + lam^T h(z) + rho/2 |h(z)|^2

over the box with a projected Levenberg-Marquardt method: the penalty term is
modelled by its Gauss-Newton curvature ``rho J^T J`` and the damping absorbs
the objective's curvature. Multipliers and penalty follow the usual
bound-constrained augmented-Lagrangian schedule (multiplier step when the
infeasibility has dropped enough, penalty increase otherwise).

Reliable on the minimum-effort problems and small smooth instances. The
robust problem's linking rows kink wherever a node time crosses a control
knot; this method's steps collapse near such points, so robust instances
should go to the interior-point backend.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..nlp import NlpProblem
from . import SolverOptions, finalize

RHO_INIT = 10.0
RHO_MAX = 1e10
MU_INIT = 1e-3
MU_MIN = 1e-12
MU_MAX = 1e12


class _Merit:
    def __init__(self, problem: NlpProblem):
        self.p = problem
        eq = problem.c_lb == problem.c_ub
        self.eq = np.flatnonzero(eq)
        self.ineq = np.flatnonzero(~eq)
        self.n = problem.n
        self.ns = self.ineq.size
        self.lo = np.concatenate([problem.x_lb, problem.c_lb[self.ineq]])
        self.hi = np.concatenate([problem.x_ub, problem.c_ub[self.ineq]])
        # constraint order in h: equalities first, then slacked inequalities
        self.order = np.concatenate([self.eq, self.ineq])
        m = self.order.size
        self.S = sp.csr_matrix((-np.ones(self.ns), (np.arange(self.eq.size, m), np.arange(self.ns))),
                               shape=(m, self.ns))

    def h(self, z):
        x, s = z[:self.n], z[self.n:]
        c = self.p.constraints(x)
        return np.concatenate([c[self.eq] - self.p.c_lb[self.eq], c[self.ineq] - s])

    def jac(self, z):
        J = self.p.jacobian(z[:self.n])[self.order]
        return sp.hstack([J, self.S], format="csr")

    def value(self, z, lam, rho):
        h = self.h(z)
        return float(self.p.objective(z[:self.n])) + lam @ h + 0.5 * rho * (h @ h), h

    def grad(self, z, lam, rho, h):
        Jh = self.jac(z)
        g = Jh.T @ (lam + rho * h)
        g[:self.n] += self.p.gradient(z[:self.n])
        return g, Jh


def _projected_gradient(z, g, lo, hi):
    return np.clip(z - g, lo, hi) - z


def _inner(merit: _Merit, z, lam, rho, omega, budget, mu, trace=False):
    """Projected LM on Phi; returns (z, h, iterations, mu, converged)."""
    lo, hi = merit.lo, merit.hi
    phi, h = merit.value(z, lam, rho)
    g, Jh = merit.grad(z, lam, rho, h)
    n = merit.n
    gf = merit.p.gradient(z[:n])
    sigma = 0.0  # scalar secant estimate of the objective curvature
    it = 0
    while it < budget:
        pg = _projected_gradient(z, g, lo, hi)
        if np.max(np.abs(pg), initial=0.0) <= omega:
            return z, h, it, mu, True
        it += 1
        if trace:
            print(f"  inner {it}: phi={phi:.6e} |pg|={np.max(np.abs(pg)):.2e} mu={mu:.1e} "
                  f"sigma={sigma:.1e} |h|={np.max(np.abs(h), initial=0.0):.2e}")
        at_lo = (z <= lo + 1e-12) & (g > 0)
        at_hi = (z >= hi - 1e-12) & (g < 0)
        free = ~(at_lo | at_hi)
        JF = Jh[:, free]
        H = (rho * (JF.T @ JF)).tocsc()
        accepted = False
        while not accepted:
            M = H + (mu + sigma) * sp.identity(H.shape[0], format="csc")
            try:
                lu = splu(M)
            except RuntimeError:
                mu = min(mu * 10, MU_MAX)
                continue
            d = np.zeros_like(z)
            d[free] = -lu.solve(g[free])
            z_new = np.clip(z + d, lo, hi)
            step = z_new - z
            predicted = -(g @ step) - 0.5 * (rho * np.sum((Jh @ step) ** 2)
                                             + (mu + sigma) * step @ step)
            phi_new, h_new = merit.value(z_new, lam, rho)
            if not phi_new < phi:
                # second-order correction: re-linearize the residual at the
                # trial point with the factored matrix; absorbs residual jumps
                # that are linear in some variable (kinks in interpolated rows)
                gc = Jh.T @ (lam + rho * h_new)
                gc[:n] += merit.p.gradient(z_new[:n])
                dc = np.zeros_like(z)
                dc[free] = -lu.solve(gc[free])
                z_soc = np.clip(z_new + dc, lo, hi)
                phi_soc, h_soc = merit.value(z_soc, lam, rho)
                if phi_soc < phi:
                    z_new, phi_new, h_new = z_soc, phi_soc, h_soc
                    step = z_new - z
            ratio = (phi - phi_new) / predicted if predicted > 0 else 0.0
            if trace:
                print(f"    try mu={mu:.1e} ratio={ratio:.3f} |d|={np.max(np.abs(step)):.2e}")
            if phi_new < phi and np.isfinite(phi_new):
                mu = max(mu / 3.0, MU_MIN) if ratio > 0.25 else mu
                z, phi, h = z_new, phi_new, h_new
                g, Jh = merit.grad(z, lam, rho, h)
                gf_new = merit.p.gradient(z[:n])
                sx = step[:n]
                ss = sx @ sx
                if ss > 0:
                    sigma = max((gf_new - gf) @ sx / ss, 0.0)
                gf = gf_new
                accepted = True
            else:
                mu *= 4.0
                if mu > MU_MAX or np.max(np.abs(step), initial=0.0) < 1e-16:
                    return z, h, it, min(mu, MU_MAX), False
    return z, h, it, mu, False


def solve_auglag(problem: NlpProblem, opts: SolverOptions):
    merit = _Merit(problem)
    x0 = np.clip(np.asarray(problem.x0, dtype=float), problem.x_lb, problem.x_ub)
    c0 = problem.constraints(x0)
    z = np.concatenate([x0, np.clip(c0[merit.ineq], merit.lo[merit.n:], merit.hi[merit.n:])])
    lam = np.zeros(merit.order.size)
    rho = RHO_INIT
    omega, eta = 1.0 / rho, 1.0 / rho**0.1
    mu = MU_INIT
    iters, outer = 0, 0
    converged = False
    message = ""
    while iters < opts.max_iter:
        outer += 1
        z, h, k, mu, inner_ok = _inner(merit, z, lam, rho, max(omega, opts.optimality_tol),
                                       opts.max_iter - iters, mu, opts.verbosity > 1)
        iters += k
        infeas = np.max(np.abs(h), initial=0.0)
        if opts.verbosity:
            print(f"auglag outer {outer}: rho={rho:.1e} |h|={infeas:.2e} inner={k} ok={inner_ok}")
        if infeas <= opts.constraint_tol and inner_ok and omega <= opts.optimality_tol:
            converged = True
            message = f"converged after {outer} outer iterations"
            break
        if infeas <= eta:
            lam = lam + rho * h
            eta = max(eta / rho**0.9, 0.1 * opts.constraint_tol)
            omega = max(omega / rho, 0.1 * opts.optimality_tol)
        elif rho < RHO_MAX:
            rho = min(rho * 10.0, RHO_MAX)
            eta = max(1.0 / rho**0.1, 0.1 * opts.constraint_tol)
            omega = max(1.0 / rho, 0.1 * opts.optimality_tol)
        elif not inner_ok:
            message = "penalty at its cap and inner solve stalled"
            break
        if k == 0 and inner_ok and infeas <= opts.constraint_tol:
            # multipliers settled and inner tolerance already met at the floor
            converged = omega <= opts.optimality_tol
            if converged:
                message = f"converged after {outer} outer iterations"
                break
    else:
        message = "iteration limit"
    return finalize(problem, z[:merit.n], converged, iters, opts, "auglag", message,
                    hit_limit=iters >= opts.max_iter)
