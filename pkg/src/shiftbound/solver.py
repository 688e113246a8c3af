"""Projected-gradient augmented-Lagrangian solver for non-convex bounds.

Handles every estimand the LP path cannot: M-estimator coefficients
(through hypergradients), the discrete ATE, linear-basis ratio models
(whose floor is not a box), and covariance-sign restrictions. The moment
equalities are linear in alpha, so the method of multipliers drives
lambda to the constraint duals that the variance formulas need, which is
the reason for preferring it over projecting onto the constraint set.

Each restart perturbs the uniform-weights initialization and runs its own
RNG stream; the best feasible restart wins. The spread across restarts is
reported as a diagnostic, not asserted, since local optima are possible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ConditionalMean, DiscreteATE, MCoefficient, Mean, eval_expr
from .errors import InnerDivergence, NoFeasiblePointFound
from .inference import BoundEstimate, normal_ci, variance_convex
from .mestim import (
    LOGISTIC,
    ate_value,
    covariance_sign_penalty,
    estimand_design,
    hypergradient,
    m_gradients,
    weighted_logistic,
    weighted_ols,
)
from .ratios import (
    LINEAR_BASIS,
    init_uniform,
    param_lower_bounds,
    project_floor,
    theta_jacobian,
)

_ARMIJO = 1e-4
_MIN_STEP = 1e-12


@dataclass
class SolverSettings:
    step_size: float = 0.05
    max_outer: int = 50
    max_inner: int = 2000
    inner_tol: float = 1e-8
    penalty_mu: float = 10.0
    mu_growth: float = 2.0
    mu_cap: float = 1e6
    constraint_tol: float = 1e-5
    restarts: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.step_size <= 0 or self.penalty_mu <= 0:
            raise ValueError("step_size and penalty_mu must be positive")
        if self.restarts < 1:
            raise ValueError("need at least one restart")


class _Objective:
    """Value and alpha-gradient of the estimand, plus constraint residuals."""

    def __init__(self, spec, strata):
        self.spec = spec
        self.model = spec.ratio_model
        self.strata = strata
        self.jac = theta_jacobian(self.model, strata)
        self.w = strata.weights
        self.rows = strata.row_to_stratum()
        ds = spec.dataset
        cons = spec.moment_constraints()
        gbar = np.vstack(
            [strata.stratum_means(eval_expr(c.expr, ds)) for c in cons]
        )
        self.a_eq = (gbar * self.w) @ self.jac.T
        self.targets = np.array([c.target for c in cons])
        self.signs = spec.sign_constraints()
        est = spec.estimand
        if isinstance(est, Mean):
            hbar = strata.stratum_means(eval_expr(est.h_expr, ds))
            self._c_lin = self.jac @ (self.w * hbar)
        elif isinstance(est, ConditionalMean):
            ind = eval_expr(est.condition_expr, ds)
            h = eval_expr(est.h_expr, ds)
            self._m1 = strata.stratum_means(ind * h) * self.w
            self._m0 = strata.stratum_means(ind) * self.w
        elif isinstance(est, MCoefficient):
            self._design, self._resp = estimand_design(est, ds)
            self._hgrad = np.zeros(self._design.shape[1])
            self._hgrad[est.coord_index] = 1.0
        elif not isinstance(est, DiscreteATE):
            raise TypeError(f"unsupported estimand {type(est).__name__}")
        self.last_fit = None

    def theta(self, alpha):
        return self.jac.T @ alpha

    def value_grad(self, alpha):
        """Estimand value f(alpha) and its alpha-gradient."""
        est = self.spec.estimand
        theta = self.theta(alpha)
        if isinstance(est, Mean):
            return float(self._c_lin @ alpha), self._c_lin
        if isinstance(est, ConditionalMean):
            num = float(self._m1 @ theta)
            den = max(float(self._m0 @ theta), 1e-12)
            grad_theta = (self._m1 * den - num * self._m0) / den**2
            return num / den, self.jac @ grad_theta
        if isinstance(est, DiscreteATE):
            val, grad_theta = ate_value(theta, self.strata, est)
            return val, self.jac @ grad_theta
        weights = theta[self.rows]
        if est.family == LOGISTIC:
            fit = weighted_logistic(self._design, self._resp, weights)
        else:
            fit = weighted_ols(self._design, self._resp, weights)
        self.last_fit = fit
        mg = m_gradients(est.family, self._design, self._resp, fit.beta)
        grad = hypergradient(self.model, self.strata, fit, mg, self._hgrad)
        return float(fit.beta[est.coord_index]), grad

    def residuals(self, alpha):
        return self.a_eq @ alpha - self.targets

    def sign_penalties(self, alpha):
        """Sum of squared hinges and its gradient; worst raw violation."""
        if not self.signs:
            return 0.0, np.zeros(alpha.size), 0.0
        theta = self.theta(alpha)
        total = 0.0
        grad = np.zeros(alpha.size)
        worst = 0.0
        for c in self.signs:
            pen, g_theta = covariance_sign_penalty(
                theta, c, self.spec.dataset, self.strata
            )
            total += pen
            grad += self.jac @ g_theta
            worst = max(worst, np.sqrt(pen))
        return total, grad, worst

    def floor_penalty(self, alpha):
        """Quadratic floor penalty for basis models; zero for box models."""
        if self.model.kind != LINEAR_BASIS or self.model.floor <= 0:
            return 0.0, np.zeros(alpha.size), 0.0
        theta = self.theta(alpha)
        gap = np.maximum(0.0, self.model.floor - theta)
        pen = float(self.w @ gap**2)
        grad = self.jac @ (-2.0 * self.w * gap)
        return pen, grad, float(gap.max())


def _inner_solve(obj, alpha, lam, mu, sign_flip, settings):
    """Projected gradient with Armijo backtracking on the AL objective."""
    box = obj.model.kind != LINEAR_BASIS
    lb = param_lower_bounds(obj.model, obj.strata) if box else None

    def al(a):
        f, g_f = obj.value_grad(a)
        c = obj.residuals(a)
        pen_s, g_s, _ = obj.sign_penalties(a)
        pen_f, g_pf, _ = obj.floor_penalty(a)
        val = (
            sign_flip * f
            + lam @ c
            + 0.5 * mu * (c @ c)
            + 0.5 * mu * pen_s
            + 0.5 * mu * pen_f
        )
        grad = (
            sign_flip * g_f
            + obj.a_eq.T @ (lam + mu * c)
            + 0.5 * mu * g_s
            + 0.5 * mu * g_pf
        )
        return val, grad

    def project(a):
        return np.maximum(a, lb) if box else a

    val, grad = al(alpha)
    step = settings.step_size
    converged = False
    for _ in range(settings.max_inner):
        if not np.isfinite(val):
            raise InnerDivergence("augmented objective is not finite")
        cand = project(alpha - step * grad)
        move = alpha - cand
        pg_norm = float(np.linalg.norm(move)) / step
        if pg_norm <= settings.inner_tol * max(1.0, float(np.linalg.norm(alpha))):
            converged = True
            break
        cand_val, cand_grad = al(cand)
        accepted = cand_val <= val - _ARMIJO / step * float(move @ move)
        if accepted:
            alpha, val, grad = cand, cand_val, cand_grad
            step = min(step * 1.5, settings.step_size * 20)
        else:
            step *= 0.5
            if step < _MIN_STEP:
                # the line search cannot move: stationary up to rounding
                converged = True
                break
    return alpha, val, converged


def solve_nonconvex_bound(spec, strata, settings=None, ci_level=0.95):
    """Best feasible bound value over restarts of the AL solver."""
    settings = settings or SolverSettings()
    obj = _Objective(spec, strata)
    sign_flip = 1.0 if spec.side == "lower" else -1.0
    base = init_uniform(spec.ratio_model, strata)

    restart_values = []
    best = None
    for r in range(settings.restarts):
        rng = np.random.default_rng(settings.seed + r)
        alpha = base + rng.uniform(-0.1, 0.1, size=base.size)
        if obj.model.kind != LINEAR_BASIS:
            alpha = project_floor(spec.ratio_model, alpha, strata)
        lam = np.zeros(obj.targets.size)
        mu = settings.penalty_mu
        prev_viol = np.inf
        value = np.nan
        viol = np.inf
        for _ in range(settings.max_outer):
            alpha, _, inner_ok = _inner_solve(obj, alpha, lam, mu, sign_flip, settings)
            c = obj.residuals(alpha)
            _, _, sign_viol = obj.sign_penalties(alpha)
            _, _, floor_viol = obj.floor_penalty(alpha)
            viol = max(float(np.abs(c).max()), sign_viol, floor_viol)
            new_value = obj.value_grad(alpha)[0]
            done = (
                inner_ok
                and viol <= settings.constraint_tol
                and np.isfinite(value)
                and abs(new_value - value) <= 1e-7
            )
            value = new_value
            if done:
                break
            lam = lam + mu * c
            if viol > 0.25 * prev_viol:
                mu = min(mu * settings.mu_growth, settings.mu_cap)
            prev_viol = viol
        feasible = viol <= settings.constraint_tol
        restart_values.append(value if feasible else np.nan)
        if feasible:
            better = best is None or sign_flip * value < sign_flip * best[0]
            if better:
                best = (value, alpha.copy(), lam.copy(), viol, mu)

    if best is None:
        raise NoFeasiblePointFound(
            f"no restart met constraint tolerance {settings.constraint_tol:g}"
        )
    value, alpha, lam, viol, mu_final = best
    feas_vals = [v for v in restart_values if np.isfinite(v)]
    spread = float(max(feas_vals) - min(feas_vals)) if len(feas_vals) > 1 else 0.0
    theta = obj.theta(alpha)
    # multipliers feed the influence-function variance: the AL lambda is
    # already in the +lambda'(E[theta g]-c) convention on the minimized
    # objective; the upper side flips back to the original sense
    duals = lam if spec.side == "lower" else -lam
    diagnostics = {
        "status": "Optimal",
        "restart_values": restart_values,
        "restart_spread": spread,
        "constraint_violation": viol,
        "hypergradient_sign": "minus",
        "mu_final": mu_final,
    }
    est = spec.estimand
    if isinstance(est, (Mean, ConditionalMean)) and not spec.sign_constraints():
        if isinstance(est, Mean):
            sigma2 = variance_convex(spec, theta, duals, strata)
        else:
            ind = eval_expr(est.condition_expr, spec.dataset)
            h = eval_expr(est.h_expr, spec.dataset)
            den = float((strata.stratum_means(ind) * strata.weights) @ theta)
            h_lin = ind * (h - value) / max(den, 1e-12)
            sigma2 = variance_convex(spec, theta, duals, strata, h_values=h_lin)
        ci = normal_ci(
            value, sigma2, spec.dataset.n, ci_level,
            mode="lower" if spec.side == "lower" else "upper",
        )
    else:
        # M-coefficient variance comes from variance_mbound at call sites
        # with sample splitting; ATE and sign-constrained problems are
        # bootstrap-only
        sigma2 = 0.0
        ci = (value, value)
        diagnostics["variance"] = "external"
    return BoundEstimate(
        side=spec.side,
        value=value,
        alpha_star=alpha,
        theta_star=theta,
        duals=duals,
        sigma2=sigma2,
        n=spec.dataset.n,
        ci_level=ci_level,
        ci=ci,
        diagnostics=diagnostics,
    )
