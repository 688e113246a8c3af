"""Variance estimates and confidence intervals for bound endpoints.

Two variance routes: the convex (LP) path uses the influence function of
the program value, Var[theta* h + sum_j lambda*_j (theta* g_j - c_j)];
the M-estimation path uses the sandwich covariance of the inner fit plus
the constraint-noise term. Intervals combine identification and sampling
uncertainty with a one-sided normal margin per endpoint.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .data import build_strata, eval_expr
from .errors import (
    AllReplicatesInfeasible,
    BadLevel,
    CrossedBounds,
    DatasetError,
    HessianNotPD,
    TooManyFolds,
)

_CROSS_TOL = 1e-6


@dataclass
class BoundEstimate:
    """One endpoint of an identification interval, with its uncertainty."""

    side: str
    value: float
    alpha_star: np.ndarray
    theta_star: np.ndarray  # per stratum
    duals: np.ndarray  # multiplier estimates, aligned to moment constraints
    sigma2: float
    n: int
    ci_level: float
    ci: tuple
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status != "Optimal":
            return
        if self.sigma2 < 0:
            # numerically tiny negatives only; anything real is a bug upstream
            if self.sigma2 < -1e-12:
                raise ValueError(f"negative variance {self.sigma2}")
            self.sigma2 = 0.0
        if not (self.ci[0] <= self.value <= self.ci[1]):
            raise ValueError("confidence interval must contain the estimate")

    @property
    def status(self):
        return self.diagnostics.get("status", "Optimal")


@dataclass
class IdentificationInterval:
    lower: BoundEstimate
    upper: BoundEstimate
    outer: tuple
    level: float


def _moment_data(spec):
    """Per-sample g values (one row per moment constraint) and targets."""
    ds = spec.dataset
    cons = spec.moment_constraints()
    g = np.vstack([eval_expr(c.expr, ds) for c in cons])
    targets = np.array([c.target for c in cons])
    return g, targets


def _theta_per_sample(spec, theta_star, strata):
    theta_star = np.asarray(theta_star, dtype=float)
    if theta_star.size == spec.dataset.n:
        return theta_star
    if strata is None:
        strata = build_strata(spec.dataset, spec.ratio_model.key_columns)
    return theta_star[strata.row_to_stratum()]


def variance_convex(spec, theta_star, duals, strata=None, h_values=None):
    """Asymptotic variance of the LP bound value (per observation).

    Sample variance (denominator N-1) of
    Z_i = theta_i h_i + sum_j duals_j (theta_i g_ji - c_j); the subtracted
    targets c_j are constants and cannot change the result, but the formula
    is kept verbatim. ``h_values`` overrides the estimand values per sample
    (the conditional-mean path passes its linearized objective).
    """
    ds = spec.dataset
    if ds.n < 2:
        raise DatasetError("variance needs at least 2 samples")
    theta = _theta_per_sample(spec, theta_star, strata)
    if h_values is None:
        h_values = eval_expr(spec.estimand.h_expr, ds)
    g, targets = _moment_data(spec)
    duals = np.asarray(duals, dtype=float)
    z = theta * h_values + duals @ (theta * g - targets[:, None])
    return float(np.var(z, ddof=1))


def sandwich_cov(fit, theta_weights, design, m_grad):
    """H^-1 [ (1/N) sum theta_i^2 grad m_i grad m_i^T ] H^-1."""
    theta = np.asarray(theta_weights, dtype=float)
    n = design.shape[0]
    try:
        np.linalg.cholesky(fit.hessian)
    except np.linalg.LinAlgError:
        raise HessianNotPD("inner Hessian is not positive definite")
    scaled = m_grad * theta[:, None]
    meat = scaled.T @ scaled / n
    hinv = np.linalg.inv(fit.hessian)
    return hinv @ meat @ hinv


def variance_mbound(
    spec, fit, model, alpha_star, duals, strata=None, split=False
):
    """Prop-3-style variance for an M-coefficient bound.

    grad_h' Sigma* grad_h plus the sample variance of the constraint term
    sum_j duals_j theta_i g_ji. Without sample splitting the cross-covariance
    between the two pieces is ignored; a warning flags that.
    """
    from .mestim import estimand_design, m_gradients  # local: avoids cycle

    if not split:
        warnings.warn(
            "Prop-3 variance without sample splitting ignores the "
            "covariance between the M-estimation and constraint terms",
            stacklevel=2,
        )
    from .ratios import theta_values

    ds = spec.dataset
    if strata is None:
        strata = build_strata(ds, model.key_columns)
    theta = theta_values(model, alpha_star, strata)[strata.row_to_stratum()]
    design, y = estimand_design(spec.estimand, ds)
    m_grad = m_gradients(spec.estimand.family, design, y, fit.beta)
    cov = sandwich_cov(fit, theta, design, m_grad)
    h_grad = np.zeros(design.shape[1])
    h_grad[spec.estimand.coord_index] = 1.0
    term_m = float(h_grad @ cov @ h_grad)
    g, _ = _moment_data(spec)
    duals = np.asarray(duals, dtype=float)
    term_c = float(np.var(duals @ (theta * g), ddof=1)) if g.size else 0.0
    return term_m + term_c


def normal_ci(value, sigma2, n, level, mode="two"):
    """Normal interval value -/+ z sqrt(sigma2/n).

    ``mode`` selects two-sided or the one-sided variant used for bound
    endpoints: "lower" extends downward only, "upper" upward only.
    """
    if not 0.0 < level < 1.0:
        raise BadLevel(f"level must lie in (0,1), got {level}")
    if sigma2 < 0 or n < 1:
        raise BadLevel("sigma2 must be >= 0 and n >= 1")
    se = float(np.sqrt(sigma2 / n))
    if mode == "two":
        z = norm.ppf(0.5 + level / 2)
        return (value - z * se, value + z * se)
    z = norm.ppf(level)
    if mode == "lower":
        return (value - z * se, value)
    if mode == "upper":
        return (value, value + z * se)
    raise BadLevel(f"unknown mode {mode!r}")


def identification_interval(lower_be, upper_be, level=0.95):
    """Combine two endpoint estimates into the outer interval.

    Each endpoint gets a one-sided z margin pointing outward; overall
    coverage >= level by the union bound, no Bonferroni correction.
    """
    if upper_be.value < lower_be.value - _CROSS_TOL:
        raise CrossedBounds(
            f"upper {upper_be.value:.6g} below lower {lower_be.value:.6g}"
        )
    lo = normal_ci(lower_be.value, lower_be.sigma2, lower_be.n, level, "lower")[0]
    hi = normal_ci(upper_be.value, upper_be.sigma2, upper_be.n, level, "upper")[1]
    return IdentificationInterval(lower_be, upper_be, (lo, hi), level)


def bootstrap_bounds(spec, b, seed, solve_fn):
    """Resample the dataset B times and re-solve both bounds each time.

    ``solve_fn(spec_rep)`` returns an IdentificationInterval or None when
    the replicate's constraint system is infeasible; infeasible replicates
    are excluded from the summary and counted.
    """
    if b < 1:
        raise ValueError("need at least one bootstrap replicate")
    n = spec.dataset.n
    intervals = []
    infeasible = 0
    for rep in range(b):
        rng = np.random.default_rng(seed + rep)
        idx = rng.integers(0, n, size=n)
        rep_spec = spec.with_dataset(spec.dataset.take_rows(idx))
        result = solve_fn(rep_spec)
        if result is None:
            infeasible += 1
        else:
            intervals.append(result)
    if not intervals:
        raise AllReplicatesInfeasible(f"all {b} replicates infeasible")
    lows = np.array([iv.lower.value for iv in intervals])
    highs = np.array([iv.upper.value for iv in intervals])
    summary = {
        "replicates": b,
        "infeasible": infeasible,
        "lower_mean": float(lows.mean()),
        "lower_std": float(lows.std(ddof=1)) if lows.size > 1 else 0.0,
        "lower_band": (float(np.percentile(lows, 2.5)), float(np.percentile(lows, 97.5))),
        "upper_mean": float(highs.mean()),
        "upper_std": float(highs.std(ddof=1)) if highs.size > 1 else 0.0,
        "upper_band": (float(np.percentile(highs, 2.5)), float(np.percentile(highs, 97.5))),
    }
    return intervals, summary


def sample_split(ds, k, seed):
    """k disjoint folds covering the dataset, sizes differing by <= 1."""
    if k > ds.n:
        raise TooManyFolds(f"cannot split {ds.n} rows into {k} folds")
    perm = np.random.default_rng(seed).permutation(ds.n)
    return [ds.take_rows(np.sort(part)) for part in np.array_split(perm, k)]
