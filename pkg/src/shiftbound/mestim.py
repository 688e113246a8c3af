"""Weighted M-estimation inner solves and their implicit derivatives.

The bilevel path bounds h(beta*(theta_alpha)) where beta* minimizes the
weighted empirical risk (1/N) sum_i theta_i m(x_i, beta). Everything the
outer solver needs is here: the two inner families (least squares and
logistic), the mixed second derivative coupling alpha to beta, the
implicit-function-theorem hypergradient, and the two non-M objectives
(discrete ATE, covariance-sign penalty) differentiated by hand.

Least squares uses m = (x'beta - y)^2, so the risk Hessian is (2/N) X'WX;
logistic uses the negative log-likelihood with Fisher information Hessian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyCell,
    HessianNotPD,
    Separation,
    SingularDesign,
    UnknownColumn,
    ZeroMass,
)
from .ratios import theta_jacobian

LINEAR = "linear"
LOGISTIC = "logistic"

_SEPARATION_NORM = 1e3
_COND_FLOOR = 1e-10


@dataclass
class FittedM:
    beta: np.ndarray
    hessian: np.ndarray
    converged: bool
    iterations: int
    final_grad_norm: float


def estimand_design(estimand, ds):
    """Design matrix and response for an MCoefficient estimand."""
    cols = [ds.column(name) for name in estimand.design_columns]
    design = np.column_stack(cols) if cols else np.empty((ds.n, 0))
    if estimand.intercept:
        design = np.column_stack([np.ones(ds.n), design])
    return design, ds.column(estimand.response)


def _check_conditioning(gram):
    s = np.linalg.svd(gram, compute_uv=False)
    if s[0] <= 0 or s[-1] <= _COND_FLOOR * s[0]:
        raise SingularDesign(
            f"weighted Gram matrix condition beyond {_COND_FLOOR:g}"
        )


def weighted_ols(design, y, weights):
    """Closed-form weighted least squares; H = (2/N) X'WX."""
    w = np.asarray(weights, dtype=float)
    n = design.shape[0]
    xtw = design.T * w
    gram = xtw @ design
    _check_conditioning(gram)
    beta = np.linalg.solve(gram, xtw @ y)
    hessian = 2.0 * gram / n
    grad = 2.0 * xtw @ (design @ beta - y) / n
    return FittedM(
        beta=beta,
        hessian=hessian,
        converged=True,
        iterations=1,
        final_grad_norm=float(np.linalg.norm(grad)),
    )


def weighted_logistic(design, y, weights, inner_tol=1e-10, max_iter=100):
    """Newton (IRLS) on the weighted negative log-likelihood."""
    w = np.asarray(weights, dtype=float)
    n = design.shape[0]
    beta = np.zeros(design.shape[1])
    for it in range(1, max_iter + 1):
        eta = design @ beta
        p = 1.0 / (1.0 + np.exp(-eta))
        grad = design.T @ (w * (p - y)) / n
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= inner_tol * max(1.0, float(np.linalg.norm(beta))):
            d = w * p * (1.0 - p)
            hessian = (design.T * d) @ design / n
            return FittedM(beta, hessian, True, it, gnorm)
        d = w * p * (1.0 - p)
        hess = (design.T * d) @ design / n
        _check_conditioning(hess)
        beta = beta - np.linalg.solve(hess, grad)
        if np.linalg.norm(beta) > _SEPARATION_NORM:
            raise Separation(
                f"coefficients diverged past {_SEPARATION_NORM:g}; "
                "classes are (weight-)separable"
            )
    d = w * p * (1.0 - p)
    hessian = (design.T * d) @ design / n
    return FittedM(beta, hessian, False, max_iter, gnorm)


def m_gradients(family, design, y, beta):
    """Per-sample gradient of the loss m(x_i, beta), one row per sample."""
    if family == LINEAR:
        return 2.0 * design * (design @ beta - y)[:, None]
    if family == LOGISTIC:
        p = 1.0 / (1.0 + np.exp(-(design @ beta)))
        return design * (p - y)[:, None]
    raise DimensionMismatch(f"unknown M-estimator family {family!r}")


def mixed_second(model, strata, m_grad):
    """d x p matrix with entries (1/N) sum_i (d theta_i/d alpha_k) dm_i/db_j.

    The models are linear in alpha, so the per-sample theta derivative is
    the stratum-level Jacobian scattered to rows.
    """
    n = strata.n_total
    if m_grad.shape[0] != n:
        raise DimensionMismatch(
            f"m_grad has {m_grad.shape[0]} rows for {n} samples"
        )
    jac = theta_jacobian(model, strata)
    jac_rows = jac[:, strata.row_to_stratum()]
    return jac_rows @ m_grad / n


def hypergradient(model, strata, fit, m_grad, h_grad):
    """Gradient of h(beta*(theta_alpha)) in alpha via the IFT.

    Returns -M H^-1 grad_h: differentiating the stationarity condition
    grad_beta risk(alpha, beta*) = 0 gives dbeta*/dalpha = -H^-1 M^T, minus
    sign included; central finite differences pin it down (see tests).
    """
    try:
        np.linalg.cholesky(fit.hessian)
    except np.linalg.LinAlgError:
        raise HessianNotPD("inner Hessian must be positive definite")
    mixed = mixed_second(model, strata, m_grad)
    return -mixed @ np.linalg.solve(fit.hessian, h_grad)


def _ate_cells(strata, estimand):
    """Map stratum index -> (y, a, x-profile) using stratum key positions."""
    key = strata.key_columns
    for name in (estimand.y_column, estimand.a_column, *estimand.x_columns):
        if name not in key:
            raise UnknownColumn(
                f"stratum key lacks column {name!r} needed by the ATE"
            )
    iy = key.index(estimand.y_column)
    ia = key.index(estimand.a_column)
    ix = [key.index(c) for c in estimand.x_columns]
    cells = []
    for s in strata.strata:
        cells.append(
            (s.profile[iy], s.profile[ia], tuple(s.profile[i] for i in ix))
        )
    return cells


def ate_value(theta, strata, estimand):
    """Discrete ATE of the theta-reweighted joint, with d/d theta.

    With reweighted cell masses m(y,a,x) = sum_{s in cell} w_s theta_s:
    value = sum_x p(x) [ P(Y=1|A=1,x) - P(Y=1|A=0,x) ], all probabilities
    read off the reweighted table. Empty sample cells are a data problem
    and raise; reweighted mass below 1e-12 in any (a,x) cell raises too.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.size != len(strata):
        raise DimensionMismatch("theta must have one value per stratum")
    w = strata.weights
    cells = _ate_cells(strata, estimand)

    counts = {}
    for s, cell in zip(strata.strata, cells):
        _, a, x = cell
        counts[(a, x)] = counts.get((a, x), 0) + s.count
    xs = sorted({x for (_, x) in counts})
    for x in xs:
        for a in (0, 1):
            if counts.get((a, x), 0) == 0:
                raise EmptyCell(x, a)

    mass_yax = {}
    mass_ax = {}
    mass_x = {}
    for k, cell in enumerate(cells):
        y, a, x = cell
        m = w[k] * theta[k]
        mass_yax[cell] = mass_yax.get(cell, 0.0) + m
        mass_ax[(a, x)] = mass_ax.get((a, x), 0.0) + m
        mass_x[x] = mass_x.get(x, 0.0) + m
    total = sum(mass_x.values())
    if total < 1e-12:
        raise ZeroMass("total reweighted mass vanished")
    for x in xs:
        for a in (0, 1):
            if mass_ax.get((a, x), 0.0) < 1e-12:
                raise ZeroMass(f"reweighted mass of cell (a={a}, x={x}) vanished")

    rate = {
        (a, x): mass_yax.get((1, a, x), 0.0) / mass_ax[(a, x)]
        for x in xs
        for a in (0, 1)
    }
    value = sum(
        mass_x[x] / total * (rate[(1, x)] - rate[(0, x)]) for x in xs
    )

    grad = np.zeros(theta.size)
    for k, cell in enumerate(cells):
        y, a, x = cell
        sign_a = 1.0 if a == 1 else -1.0
        contrast = rate[(1, x)] - rate[(0, x)]
        through_rate = (
            mass_x[x] / total
            * sign_a
            * ((1.0 if y == 1 else 0.0) - rate[(a, x)])
            / mass_ax[(a, x)]
        )
        through_px = contrast / total
        through_total = -value / total
        grad[k] = w[k] * (through_rate + through_px + through_total)
    return float(value), grad


def covariance_sign_penalty(theta, constraint, ds, strata):
    """Squared hinge on the reweighted covariance sign, with d/d theta.

    Cov_theta(u,v) = E_theta[uv] - E_theta[u] E_theta[v] with
    E_theta[z] = sum_s w_s theta_s zbar_s; valid when theta is normalized,
    which the equality constraints enforce at feasibility.
    """
    theta = np.asarray(theta, dtype=float)
    w = strata.weights
    u = ds.column(constraint.u)  # raises UnknownColumn for bad names
    v = ds.column(constraint.v)
    ubar = strata.stratum_means(u)
    vbar = strata.stratum_means(v)
    uvbar = strata.stratum_means(u * v)
    e_uv = float(w * theta @ uvbar)
    e_u = float(w * theta @ ubar)
    e_v = float(w * theta @ vbar)
    cov = e_uv - e_u * e_v
    violation = max(0.0, -constraint.sign * cov)
    if violation == 0.0:
        return 0.0, np.zeros(theta.size)
    dcov = w * (uvbar - ubar * e_v - vbar * e_u)
    grad = 2.0 * violation * (-constraint.sign) * dcov
    return violation**2, grad
