"""Iteration-complexity bound calculators for the randomized inexact
block coordinate descent method.

Two bound shapes are evaluated: the sublinear "case (i)" bound with the
shifted log/min structure, and the linear-rate "case (ii)" bound.
Feasibility of (alpha, beta, eps, rho) is always evaluated explicitly;
an infeasible query returns a flagged result listing the violated
conditions rather than raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from icdkit.blocks import WeightVector, weighted_norm
from icdkit.objective import CompositeObjective

__all__ = [
    "BoundInputs",
    "BoundResult",
    "sigma_u",
    "iterations_case_i",
    "iterations_case_ii",
    "exact_case_i",
    "exact_case_ii",
    "constants_composite_convex",
    "constants_strongly_convex",
    "constants_smooth_convex",
    "constants_smooth_strongly_convex",
    "level_set_radius_surrogate",
    "mu_quadratic",
]

# dense generalized eigensolves above this dimension are refused
EIGENSOLVE_DIM_CAP = 2000


@dataclass(frozen=True)
class BoundInputs:
    """Inputs to a single bound evaluation.

    c is c1 for case (i) and c2 for case (ii); xi0 is the initial
    residual F(x0) - F*; rho is the confidence parameter.
    """

    c: float
    alpha: float
    beta: float
    eps: float
    rho: float
    xi0: float

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be nonnegative")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if self.xi0 <= 0:
            raise ValueError("xi0 must be positive")


@dataclass
class BoundResult:
    K: int | None
    feasible: bool
    violated: list[str] = field(default_factory=list)
    derived: dict = field(default_factory=dict)
    raw: float | None = None


def sigma_u(c1: float, alpha: float, beta: float) -> tuple[float, float]:
    """sigma = sqrt(alpha^2 + 4 beta / c1), u = (c1/2)(alpha + sigma)."""
    if c1 <= 0:
        raise ValueError("c1 must be positive")
    sigma = math.sqrt(alpha * alpha + 4.0 * beta / c1)
    u = 0.5 * c1 * (alpha + sigma)
    return sigma, u


def iterations_case_i(inputs: BoundInputs) -> BoundResult:
    """Sublinear bound: log term plus the better of the two k1 estimates.

    Feasible when (c1/2)(alpha + sqrt(alpha^2 + 4 beta/(c1 rho))) < eps
    < min{(1+alpha) c1, xi0} and sigma < 1. The min's first branch only
    applies when sigma > 0; both branches are compared otherwise stated.
    """
    c1, a, b = inputs.c, inputs.alpha, inputs.beta
    eps, rho, xi0 = inputs.eps, inputs.rho, inputs.xi0
    sigma, u = sigma_u(c1, a, b)
    lower = 0.5 * c1 * (a + math.sqrt(a * a + 4.0 * b / (c1 * rho)))
    violated = []
    if sigma >= 1:
        violated.append("sigma = sqrt(alpha^2 + 4 beta/c1) < 1")
    if not eps > lower:
        violated.append("eps > (c1/2)(alpha + sqrt(alpha^2 + 4 beta/(c1 rho)))")
    if not eps < (1 + a) * c1:
        violated.append("eps < (1 + alpha) c1")
    if not eps < xi0:
        violated.append("eps < xi0")
    derived = {"sigma": sigma, "u": u, "eps_lower": lower}
    if violated:
        return BoundResult(None, False, violated, derived)
    shift = b * c1 / (eps - a * c1)
    k2 = c1 / (eps - a * c1) * math.log((eps - shift) / (eps * rho - shift))
    second = c1 / (eps - u) - c1 / (xi0 - u)
    if sigma == 0:
        k1 = second
    else:
        first = (1.0 / sigma) * math.log((xi0 - u) / (eps - u))
        k1 = min(first, second)
        derived["k1_first_branch"] = first
    derived["k1"] = k1
    derived["k2"] = k2
    raw = k2 + k1 + 2.0
    return BoundResult(max(0, math.ceil(raw)), True, [], derived, raw)


def iterations_case_ii(inputs: BoundInputs) -> BoundResult:
    """Linear-rate bound K = c2/(1-alpha c2) log((xi0-s)/(eps rho - s))
    with s = beta c2/(1-alpha c2)."""
    c2, a, b = inputs.c, inputs.alpha, inputs.beta
    eps, rho, xi0 = inputs.eps, inputs.rho, inputs.xi0
    violated = []
    if not a * c2 < 1:
        violated.append("alpha c2 < 1")
    if not (1 + a) * c2 >= 1:
        violated.append("(1 + alpha) c2 >= 1")
    shift = b * c2 / (1 - a * c2) if a * c2 < 1 else math.inf
    if not shift / rho < eps:
        violated.append("eps > beta c2 / (rho (1 - alpha c2))")
    if not eps < xi0:
        violated.append("eps < xi0")
    derived = {"shift": shift, "rate": 1 - (1 - a * c2) / c2 if a * c2 < 1 else None}
    if violated:
        return BoundResult(None, False, violated, derived)
    raw = c2 / (1 - a * c2) * math.log((xi0 - shift) / (eps * rho - shift))
    return BoundResult(max(0, math.ceil(raw)), True, [], derived, raw)


def exact_case_i(c1: float, eps: float, rho: float, xi0: float) -> float:
    """Exact-method closed form (c1/eps)(1 + log(1/rho)) + 2 - c1/xi0."""
    return c1 / eps * (1.0 + math.log(1.0 / rho)) + 2.0 - c1 / xi0


def exact_case_ii(c2: float, eps: float, rho: float, xi0: float) -> float:
    """Exact-method closed form c2 log(xi0 / (eps rho))."""
    return c2 * math.log(xi0 / (eps * rho))


def constants_composite_convex(
    n: int, R2: float, xi0: float, eps: float
) -> tuple[float, float]:
    """Composite convex constants: c1 = 2n max{R^2, xi0}, c2 = 2n R^2/eps."""
    if n < 1 or R2 <= 0 or xi0 <= 0 or eps <= 0:
        raise ValueError("inputs must be positive")
    return 2.0 * n * max(R2, xi0), 2.0 * n * R2 / eps


def constants_strongly_convex(
    n: int, mu_f: float, mu_psi: float
) -> tuple[float, float, float]:
    """Strongly convex composite constants.

    mu = (mu_f + mu_psi)/(1 + mu_psi), c2 = n/mu, and the admissible
    multiplicative error is 0 <= alpha < mu/n.
    """
    if mu_f + mu_psi <= 0:
        raise ValueError("mu_f + mu_psi must be positive")
    if mu_f > 1:
        raise ValueError("mu_f measured in the Lipschitz-weighted norm cannot exceed 1")
    mu = (mu_f + mu_psi) / (1.0 + mu_psi)
    return mu, n / mu, mu / n


def constants_smooth_convex(R2: float) -> float:
    """Smooth convex constant c1_hat = 2 R^2 (radius in the L/p norm)."""
    if R2 <= 0:
        raise ValueError("R2 must be positive")
    return 2.0 * R2


def constants_smooth_strongly_convex(mu_f: float) -> float:
    """Smooth strongly convex constant c2 = 1/mu_f; requires 0 < mu_f < 1,
    so c2 > 1 always."""
    if not 0 < mu_f < 1:
        raise ValueError("mu_f must lie strictly in (0, 1)")
    return 1.0 / mu_f


def mu_quadratic(objective: CompositeObjective, weights: WeightVector) -> float:
    """Strong convexity parameter of the quadratic smooth part relative to
    the weighted block norm: the smallest generalized eigenvalue of
    A^T A v = mu * blockdiag(w_i B_i) v, by a dense eigensolve."""
    p = objective.partition
    if p.N > EIGENSOLVE_DIM_CAP:
        raise ValueError(
            f"dimension {p.N} exceeds the dense eigensolve cap "
            f"{EIGENSOLVE_DIM_CAP}; supply mu_f directly"
        )
    A = objective.smooth.A
    H = (A.T @ A).toarray() if sp.issparse(A) else A.T @ A
    Bw = np.zeros((p.N, p.N))
    for i in range(p.n):
        B = objective.metric.operators[i]
        dense = B.toarray() if sp.issparse(B) else np.asarray(B)
        sl = p.range(i)
        Bw[sl, sl] = weights.w[i] * dense
    vals = scipy.linalg.eigh(H, Bw, eigvals_only=True)
    return float(vals[0])


def level_set_radius_surrogate(
    objective: CompositeObjective,
    x0: np.ndarray,
    weights: WeightVector,
    n_samples: int = 0,
    seed: int = 0,
) -> float:
    """Computable lower surrogate for the level-set radius R_w(x0).

    Returns ||x0 - x*||_w; with n_samples > 0 it additionally maximizes
    ||y - x*||_w over random directions y with F(y) <= F(x0) (bisection
    on the ray scale), which can only increase the estimate. The result
    is a surrogate, not the exact radius, except for special geometries.
    """
    if objective.x_star is None:
        raise ValueError("the surrogate requires a known x*")
    p = objective.partition
    metric = objective.metric
    x_star = objective.x_star
    base = weighted_norm(x0 - x_star, weights, metric, p)
    if n_samples <= 0:
        return base

    def F(x):
        r = objective.smooth.residual(x)
        return objective.smooth.value_from_residual(r) + objective.reg.value(x, p)

    F0 = F(x0)
    rng = np.random.default_rng(seed)
    best = base
    for _ in range(n_samples):
        d = rng.standard_normal(p.N)
        d /= np.linalg.norm(d)
        lo, hi = 0.0, 1.0
        while F(x_star + hi * d) <= F0 and hi < 1e8:
            lo, hi = hi, 2.0 * hi
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if F(x_star + mid * d) <= F0:
                lo = mid
            else:
                hi = mid
        best = max(best, weighted_norm(lo * d, weights, metric, p))
    return best
