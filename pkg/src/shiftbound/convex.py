"""LP bounds for mean and conditional-mean estimands.

Every ratio model here is linear in its parameters, so the plug-in bound

    min/max  (1/N) sum_i theta_alpha(x_i) h(x_i)
    s.t.     (1/N) sum_i theta_alpha(x_i) g_j(x_i) = c_j   for all j

collapses to a stratum-level LP in alpha. Conditional means are ratios of
two such sums; the Charnes-Cooper change of variables

    v = t (alpha - shift),  t = 1 / [ (1/N) sum_i theta 1C_i ],  v >= 0

turns the ratio into an LP in (v, t), with the parameter floor absorbed
into the shift so all bounds are simple nonnegativity. Multipliers are
mapped back to the original problem's scale before variance estimation.
"""

from __future__ import annotations

import numpy as np

from .data import ConditionalMean, Mean, eval_expr
from .errors import DegenerateT, EmptyConditionSet, NonLinearModel, NotOptimal
from .inference import BoundEstimate, normal_ci, variance_convex
from .lp import OPTIMAL, LinearProgram, simplex_solve
from .ratios import param_lower_bounds, theta_jacobian, theta_values

T_MIN = 1e-9


def _stratum_constraint_rows(spec, strata):
    ds = spec.dataset
    cons = spec.moment_constraints()
    gbar = np.vstack([strata.stratum_means(eval_expr(c.expr, ds)) for c in cons])
    targets = np.array([c.target for c in cons])
    return gbar, targets


def build_mean_lp(spec, strata):
    """Stratum-collapsed LP for a Mean estimand, variables = alpha."""
    if not isinstance(spec.estimand, Mean):
        raise NonLinearModel(
            f"LP path needs a Mean estimand, got {type(spec.estimand).__name__}"
        )
    if spec.sign_constraints():
        raise NonLinearModel(
            "covariance-sign constraints need the projected-gradient path"
        )
    model = spec.ratio_model
    jac = theta_jacobian(model, strata)
    w = strata.weights
    hbar = strata.stratum_means(eval_expr(spec.estimand.h_expr, spec.dataset))
    gbar, targets = _stratum_constraint_rows(spec, strata)
    objective = jac @ (w * hbar)
    a_eq = (gbar * w) @ jac.T
    lb = param_lower_bounds(model, strata)
    sense = "min" if spec.side == "lower" else "max"
    return LinearProgram(objective, a_eq, targets, lb, sense)


def extract_duals(sol, spec):
    """Equality multipliers aligned to the moment constraints.

    Convention: for the lower (min) side the reduced cost c - A'lambda
    vanishes on non-active coordinates; the upper side negates.
    """
    if sol.status != OPTIMAL:
        raise NotOptimal(f"no duals for status {sol.status}")
    lam = sol.duals.copy()
    return lam if spec.side == "lower" else -lam


def _not_optimal_estimate(spec, sol):
    return BoundEstimate(
        side=spec.side,
        value=sol.value,
        alpha_star=np.array([]),
        theta_star=np.array([]),
        duals=np.array([]),
        sigma2=0.0,
        n=spec.dataset.n,
        ci_level=np.nan,
        ci=(np.nan, np.nan),
        diagnostics={"status": sol.status, "pivots": sol.pivot_count},
    )


def mean_bound(spec, strata, ci_level=0.95):
    """Solve one side of the mean bound; non-Optimal statuses pass through."""
    lp = build_mean_lp(spec, strata)
    sol = simplex_solve(lp)
    if sol.status != OPTIMAL:
        return _not_optimal_estimate(spec, sol)
    alpha = sol.primal
    theta = theta_values(spec.ratio_model, alpha, strata)
    # influence-function multipliers: the envelope theorem wants the
    # Lagrangian with +lambda'(E[theta g] - c), which is -duals in the
    # solver's db-sensitivity convention, for either sense
    lam = -sol.duals
    sigma2 = variance_convex(spec, theta, lam, strata)
    ci = normal_ci(
        sol.value, sigma2, spec.dataset.n, ci_level,
        mode="lower" if spec.side == "lower" else "upper",
    )
    return BoundEstimate(
        side=spec.side,
        value=sol.value,
        alpha_star=alpha,
        theta_star=theta,
        duals=lam,
        sigma2=sigma2,
        n=spec.dataset.n,
        ci_level=ci_level,
        ci=ci,
        diagnostics={"status": sol.status, "pivots": sol.pivot_count},
    )


def conditional_mean_bound(spec, strata, ci_level=0.95):
    """Solve one side of E[h | C] over feasible theta via Charnes-Cooper.

    LP variables (v, t): v_k = t (alpha_k - shift_k) >= 0 and the scale
    t >= t_min; stratum values y_s = t theta_s expand through the model
    Jacobian. Row 0 normalizes the condition mass, the remaining rows are
    the moment constraints with targets moved into the t column.
    """
    if not isinstance(spec.estimand, ConditionalMean):
        raise NonLinearModel("conditional_mean_bound needs ConditionalMean")
    if spec.sign_constraints():
        raise NonLinearModel(
            "covariance-sign constraints need the projected-gradient path"
        )
    ds = spec.dataset
    est = spec.estimand
    ind = eval_expr(est.condition_expr, ds)
    if not np.any(ind > 0):
        raise EmptyConditionSet("no sample satisfies the conditioning event")
    h = eval_expr(est.h_expr, ds)
    model = spec.ratio_model
    jac = theta_jacobian(model, strata)
    w = strata.weights
    m1 = strata.stratum_means(ind * h)
    m0 = strata.stratum_means(ind)
    gbar, targets = _stratum_constraint_rows(spec, strata)
    shift = param_lower_bounds(model, strata)

    q1 = jac @ (w * m1)
    q0 = jac @ (w * m0)
    qg = (gbar * w) @ jac.T  # one row per moment constraint
    d = q1.size
    objective = np.concatenate([q1, [q1 @ shift]])
    a_eq = np.zeros((1 + targets.size, d + 1))
    a_eq[0, :d] = q0
    a_eq[0, d] = q0 @ shift
    a_eq[1:, :d] = qg
    a_eq[1:, d] = qg @ shift - targets
    b_eq = np.zeros(1 + targets.size)
    b_eq[0] = 1.0
    lb = np.concatenate([np.zeros(d), [T_MIN]])
    sense = "min" if spec.side == "lower" else "max"
    sol = simplex_solve(LinearProgram(objective, a_eq, b_eq, lb, sense))
    if sol.status != OPTIMAL:
        return _not_optimal_estimate(spec, sol)
    t_star = sol.primal[d]
    if t_star <= T_MIN * (1 + 1e-6):
        raise DegenerateT(
            "Charnes-Cooper scale hit its floor: the reweighted condition "
            "probability can be driven to zero"
        )
    alpha = sol.primal[:d] / t_star + shift
    theta = theta_values(model, alpha, strata)
    # undo both the Charnes-Cooper scaling and the solver dual convention;
    # the fractional problem's multipliers are -t* times the row duals
    lam = -t_star * sol.duals[1:]
    h_lin = ind * (h - sol.value) * t_star
    sigma2 = variance_convex(spec, theta, lam, strata, h_values=h_lin)
    ci = normal_ci(
        sol.value, sigma2, ds.n, ci_level,
        mode="lower" if spec.side == "lower" else "upper",
    )
    return BoundEstimate(
        side=spec.side,
        value=sol.value,
        alpha_star=alpha,
        theta_star=theta,
        duals=lam,
        sigma2=sigma2,
        n=ds.n,
        ci_level=ci_level,
        ci=ci,
        diagnostics={
            "status": sol.status,
            "pivots": sol.pivot_count,
            "t_star": t_star,
        },
    )


def solve_bound(spec, strata, ci_level=0.95):
    """Dispatch to the right LP path for the spec's estimand."""
    if isinstance(spec.estimand, Mean):
        return mean_bound(spec, strata, ci_level)
    if isinstance(spec.estimand, ConditionalMean):
        return conditional_mean_bound(spec, strata, ci_level)
    raise NonLinearModel(
        f"no LP path for {type(spec.estimand).__name__}"
    )
