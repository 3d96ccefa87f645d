"""Walkthrough: iteration-complexity bounds for the inexact method.

Evaluates the high-probability iteration bounds in both the convex
(case i) and strongly convex (case ii) regimes, shows how inexactness
(alpha, beta) inflates the counts relative to the exact method, and
where the target accuracy becomes infeasible for a given budget.
"""

from icdkit.bounds import (
    BoundInputs,
    constants_strongly_convex,
    exact_case_i,
    exact_case_ii,
    iterations_case_i,
    iterations_case_ii,
)


def main():
    # convex regime: c is the level-set constant 2n*max(R^2, xi0)
    print("case (i): convex objective")
    for alpha, beta in ((0.0, 0.0), (0.001, 0.01), (0.005, 0.05)):
        res = iterations_case_i(
            BoundInputs(c=80.0, alpha=alpha, beta=beta, eps=1.0, rho=0.3678794, xi0=3.0)
        )
        print(f"  alpha={alpha:g} beta={beta:g}: K={res.K} feasible={res.feasible}")
    print(f"  exact closed form: {exact_case_i(80.0, 1.0, 0.3678794, 3.0):.2f}")

    print("case (ii): strongly convex objective")
    for alpha, beta in ((0.0, 0.0), (0.05, 0.001)):
        res = iterations_case_ii(
            BoundInputs(c=10.0, alpha=alpha, beta=beta, eps=0.3, rho=0.1, xi0=1.0)
        )
        print(f"  alpha={alpha:g} beta={beta:g}: K={res.K} feasible={res.feasible}")
    print(f"  exact closed form: {exact_case_ii(10.0, 0.3, 0.1, 1.0):.2f}")

    # pushing eps below the inexactness floor makes the bound infeasible
    res = iterations_case_ii(
        BoundInputs(c=10.0, alpha=0.05, beta=0.01, eps=0.01, rho=0.1, xi0=1.0)
    )
    print(f"  eps below the floor set by beta: feasible={res.feasible}")

    # deriving c2 and the admissible alpha range from strong convexity
    mu, c2, alpha_max = constants_strongly_convex(n=10, mu_f=0.5, mu_psi=0.1)
    print(f"strong convexity: mu={mu:.4f} c2={c2:.2f} alpha_max={alpha_max:.4f}")


if __name__ == "__main__":
    main()
