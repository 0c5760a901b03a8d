"""Two-phase solver for the per-subdomain convex programs.

min F_breve(x) over a box subject to a single smooth convex constraint
H_breve(x) <= 0.  Phase 1 minimizes H_breve alone to decide feasibility;
phase 2 minimizes a quadratic penalty with geometrically increasing weight,
warm-starting each round.  Both phases use projected gradient descent with
Armijo backtracking.

Every solution carries a rigorous lower bound on the constrained optimum,
obtained from convexity: for any multiplier lam >= 0 and any probe point z,

    min_{x in box, H_breve <= 0} F_breve
        >= F_breve(z) + lam*H_breve(z) + min_{x in box} grad_L(z) . (x - z),

and the final linear minimization is exact on a box.  The bound is tight once
the solver has converged, and stays valid even when it has not, which is what
keeps verdicts sound under iteration caps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .intervals import Box
from .underestimator import Underestimator

_ARMIJO_SIGMA = 1e-4
_MU_MAX = 1e18


@dataclass(frozen=True)
class Tolerances:
    grad: float = 1e-8
    rel: float = 1e-14
    feas: float = 1e-9
    max_iters: int = 100_000


@dataclass
class ConvexSolution:
    status: str  # "optimal" | "infeasible"
    x: np.ndarray | None
    value: float | None
    lower_bound: float
    constraint_value: float | None
    iterations: int
    step_norm: float
    converged: bool
    feasibility_bound: float | None = None  # rigorous lb of min H_breve over box


def _linear_min_term(g: np.ndarray, box: Box, x: np.ndarray) -> float:
    """Exact min over the box of g . (y - x): sum of per-axis minima."""
    lo = g * (box.lower - x)
    hi = g * (box.upper - x)
    return float(np.sum(np.minimum(lo, hi)))


def _pg_minimize(value_fn, grad_fn, box, x0, tol, max_iters):
    """Projected gradient descent with Armijo backtracking.

    The trial step is the Barzilai-Borwein estimate s.s/s.y from the last
    accepted step, which kills the zigzag on ill-conditioned quadratics;
    backtracking still enforces monotone descent.  Returns (x, f(x),
    iterations, last step norm, converged).  Deterministic: no
    randomization, fixed evaluation order.
    """
    lo, hi = box.lower, box.upper
    mn, mx = np.minimum, np.maximum
    x = mn(hi, mx(lo, np.asarray(x0, dtype=float)))
    fx = value_fn(x)
    g = grad_fn(x)
    trial = 1.0
    step_norm = math.inf
    iters = 0
    converged = False
    flat = 0
    while iters < max_iters:
        pg = x - mn(hi, mx(lo, x - g))
        if math.sqrt(float(np.dot(pg, pg))) <= tol.grad:
            converged = True
            break
        t = trial
        xn = x
        fn = fx
        while t > 1e-20:
            xn = mn(hi, mx(lo, x - t * g))
            dx = x - xn
            fn = value_fn(xn)
            if fn <= fx - _ARMIJO_SIGMA * float(np.dot(g, dx)):
                break
            t *= 0.5
        if fn > fx:
            # line search bottomed out without descent: numerical floor
            break
        s = xn - x
        step_norm = math.sqrt(float(np.dot(s, s)))
        decrease = fx - fn
        gn = grad_fn(xn)
        y = gn - g
        x, fx, g = xn, fn, gn
        iters += 1
        sy = float(np.dot(s, y))
        if sy > 0.0:
            trial = min(max(float(np.dot(s, s)) / sy, 1e-12), 1e12)
        else:
            trial = min(t * 2.0, 1e12)
        if decrease <= tol.rel * (1.0 + abs(fx)):
            # stagnated at floating-point resolution
            pg = x - mn(hi, mx(lo, x - g))
            converged = math.sqrt(float(np.dot(pg, pg))) <= tol.grad * 10
            break
        if decrease <= 1e-12 * (1.0 + abs(fx)):
            # several near-zero decreases in a row: numerically flat
            flat += 1
            if flat >= 8:
                pg = x - mn(hi, mx(lo, x - g))
                converged = math.sqrt(float(np.dot(pg, pg))) <= tol.grad * 10
                break
        else:
            flat = 0
    return x, fx, iters, step_norm, converged


def _dual_lower_bound(objective, constraint, box, x, lam_candidates):
    """Best weak-duality bound over the candidate multipliers."""
    fx = objective.value(x)
    g_f = objective.gradient(x)
    best = -math.inf
    hx = constraint.value(x) if constraint is not None else 0.0
    g_h = constraint.gradient(x) if constraint is not None else None
    for lam in lam_candidates:
        if lam < 0.0 or not math.isfinite(lam):
            continue
        if lam == 0.0 or g_h is None:
            bound = fx + _linear_min_term(g_f, box, x)
        else:
            bound = fx + lam * hx + _linear_min_term(g_f + lam * g_h, box, x)
        if bound > best:
            best = bound
    return best


def feasibility(
    constraint: Underestimator,
    box: Box,
    tol: Tolerances | None = None,
    x0: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Phase 1 alone: rigorous lower bound of min H_breve over the box.

    Returns (bound, minimizer); the set {H_breve <= 0} is empty in the box
    iff bound > tol.feas, by the same rule solve() applies.
    """
    tol = tol or Tolerances()
    start = box.midpoint if x0 is None else np.asarray(x0, dtype=float)
    x1, h1, _, _, _ = _pg_minimize(
        constraint.value, constraint.gradient, box, start, tol, tol.max_iters
    )
    return h1 + _linear_min_term(constraint.gradient(x1), box, x1), x1


def solve(
    objective: Underestimator,
    constraint: Underestimator | None,
    box: Box,
    tol: Tolerances | None = None,
    feas_target: float | None = None,
    x0: np.ndarray | None = None,
) -> ConvexSolution:
    """Minimize a convex underestimator over box subject to H_breve <= 0.

    feas_target overrides the accepted final constraint violation (defaults
    to tol.feas); infeasibility is declared only from the rigorous phase-1
    bound, so a Case-B discard is never an artifact of early stopping.
    An x0 warm start is clipped into the box; default is the box midpoint.
    """
    tol = tol or Tolerances()
    if feas_target is None:
        feas_target = tol.feas
    start = box.midpoint if x0 is None else np.asarray(x0, dtype=float)
    total_iters = 0

    if constraint is None:
        x, fx, iters, step_norm, conv = _pg_minimize(
            objective.value, objective.gradient, box, start, tol, tol.max_iters
        )
        lb = _dual_lower_bound(objective, None, box, x, (0.0,))
        return ConvexSolution(
            status="optimal",
            x=x,
            value=fx,
            lower_bound=lb,
            constraint_value=None,
            iterations=iters,
            step_norm=step_norm,
            converged=conv,
        )

    # phase 1: feasibility of {H_breve <= 0} within the box
    x1, h1, it1, sn1, conv1 = _pg_minimize(
        constraint.value, constraint.gradient, box, start, tol, tol.max_iters
    )
    total_iters += it1
    feas_bound = h1 + _linear_min_term(constraint.gradient(x1), box, x1)
    if feas_bound > tol.feas:
        return ConvexSolution(
            status="infeasible",
            x=x1,
            value=None,
            lower_bound=math.inf,
            constraint_value=h1,
            iterations=total_iters,
            step_norm=sn1,
            converged=conv1,
            feasibility_bound=feas_bound,
        )

    # phase 2: penalty rounds, warm-started from the phase-1 minimizer
    x = x1
    mu = 1.0
    lam_pen = 0.0
    conv2 = False
    while True:
        def pen_value(z, _mu=mu):
            return objective.value(z) + _mu * max(0.0, constraint.value(z)) ** 2

        def pen_grad(z, _mu=mu):
            viol = max(0.0, constraint.value(z))
            g = objective.gradient(z)
            if viol > 0.0:
                g = g + (2.0 * _mu * viol) * constraint.gradient(z)
            return g

        x, _, iters, step_norm, conv2 = _pg_minimize(
            pen_value, pen_grad, box, x, tol, tol.max_iters
        )
        total_iters += iters
        hx = constraint.value(x)
        if max(0.0, hx) <= feas_target or mu >= _MU_MAX:
            lam_pen = 2.0 * mu * max(0.0, hx)
            break
        mu *= 10.0

    fx = objective.value(x)
    g_f = objective.gradient(x)
    g_h = constraint.gradient(x)
    # least-squares multiplier estimate; any lam >= 0 yields a valid bound
    denom = float(np.dot(g_h, g_h))
    lam_ls = max(0.0, -float(np.dot(g_f, g_h)) / denom) if denom > 0.0 else 0.0
    lb = _dual_lower_bound(objective, constraint, box, x, (0.0, lam_pen, lam_ls))
    return ConvexSolution(
        status="optimal",
        x=x,
        value=fx,
        lower_bound=lb,
        constraint_value=hx,
        iterations=total_iters,
        step_norm=step_norm,
        converged=conv2,
        feasibility_bound=feas_bound,
    )
