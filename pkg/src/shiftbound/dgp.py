"""Synthetic data generators and their exact ground-truth oracles.

Two bundled designs:

* ``selection_study``: five binary/ternary variables with logistic links
  and selection R on (X1, X2). Fully discrete, so every population
  quantity (estimand truth, constraint targets, selection rate) comes from
  exact enumeration of the 48-cell support.
* ``regression_substitute``: continuous and binary outcomes regressed on
  a treatment and one-hot covariates under the same kind of selection.
  Outcome support is continuous, so truth comes from a large Monte Carlo
  oracle instead; exact enumeration raises.

The X1 marginal is a calibration constant chosen so that the exact
conditional mean, the naive estimate, and the selection rate all land on
their reference values (0.733, 0.707, 0.755). It is a config field so
other weightings remain runnable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .data import (
    CONTINUOUS,
    DISCRETE,
    ColumnSpec,
    ConditionalMean,
    Dataset,
    Mean,
    eval_expr,
)
from .errors import ContinuousSupport, OutOfRange

SELECTION_STUDY = "selection_study"
REGRESSION_SUBSTITUTE = "regression_substitute"

X1_PMF = (0.01, 0.34, 0.65)
X2_P = 0.4

# fixed parameter set for the regression substitute (published with the
# package so oracle values are reproducible)
_REG = {
    "treat": (0.3, -0.4, 0.5),  # logit of A on (1, X1, X2)
    "linear": (1.2, 0.8, -0.5, -0.2, 0.4),  # YC on (1, A, X1==1, X1==2, X2)
    "linear_sd": 0.6,
    "binary": (0.5, 0.7, -0.6, -1.1, 0.3),  # logit of YB, same design
    "select": (0.4, 0.8, -0.9),  # logit of R on (1, X1, X2)
    "x1_pmf": (0.4, 0.35, 0.25),
    "x2_p": 0.45,
}


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@dataclass(frozen=True)
class SyntheticDGP:
    kind: str = SELECTION_STUDY
    x1_pmf: tuple = X1_PMF
    x2_p: float = X2_P

    def __post_init__(self):
        if self.kind not in (SELECTION_STUDY, REGRESSION_SUBSTITUTE):
            raise OutOfRange(f"unknown DGP kind {self.kind!r}")
        pmf = np.asarray(self.x1_pmf, dtype=float)
        if pmf.size != 3 or np.any(pmf <= 0) or abs(pmf.sum() - 1) > 1e-9:
            raise OutOfRange("x1_pmf must be 3 positive weights summing to 1")

    # --- exact enumeration (selection study only) ---

    def cell_table(self):
        """Profiles (Y, Y2, A, X1, X2), target-law probabilities, Pr(R=1|cell)."""
        if self.kind != SELECTION_STUDY:
            raise ContinuousSupport(
                "regression substitute has continuous outcome support"
            )
        profiles = []
        probs = []
        select = []
        for y, y2, a, x1, x2 in itertools.product(
            (0, 1), (0, 1), (0, 1), (0, 1, 2), (0, 1)
        ):
            p = self.x1_pmf[x1] * (self.x2_p if x2 == 1 else 1 - self.x2_p)
            pa = _sigmoid(x2 - x1)
            p *= pa if a == 1 else 1 - pa
            py = _sigmoid(2 * a - x1 + x2)
            p *= py if y == 1 else 1 - py
            py2 = _sigmoid((x1 + x2) / 2.0 - a)
            p *= py2 if y2 == 1 else 1 - py2
            profiles.append((y, y2, a, x1, x2))
            probs.append(p)
            select.append(_sigmoid(x1 - x2))
        return profiles, np.array(probs), np.array(select)

    def profile_dataset(self):
        """One row per support cell, for evaluating expressions exactly."""
        profiles, _, _ = self.cell_table()
        cols = [
            ColumnSpec("Y", DISCRETE, 2),
            ColumnSpec("Y2", DISCRETE, 2),
            ColumnSpec("A", DISCRETE, 2),
            ColumnSpec("X1", DISCRETE, 3),
            ColumnSpec("X2", DISCRETE, 2),
        ]
        return Dataset(cols, np.array(profiles, dtype=float))

    def selection_rate(self):
        """Exact Pr(R=1), the theta floor."""
        _, probs, select = self.cell_table()
        return float(probs @ select)

    def observed_cell_weights(self):
        """Exact observed-law (R=1) probabilities per support cell."""
        _, probs, select = self.cell_table()
        q = probs * select
        return q / q.sum()

    def cell_probability(self, profile):
        profiles, probs, _ = self.cell_table()
        try:
            return float(probs[profiles.index(tuple(int(v) for v in profile))])
        except ValueError:
            return 0.0

    def target(self, expr):
        """Exact E_P[g] for a product expression over the support columns."""
        _, probs, _ = self.cell_table()
        values = eval_expr(expr, self.profile_dataset())
        return float(probs @ values)


def true_value_exact(dgp, estimand):
    """Exact estimand value under the target law, by enumeration."""
    _, probs, _ = dgp.cell_table()  # raises ContinuousSupport for substitute
    ds = dgp.profile_dataset()
    if isinstance(estimand, Mean):
        return float(probs @ eval_expr(estimand.h_expr, ds))
    if isinstance(estimand, ConditionalMean):
        h = eval_expr(estimand.h_expr, ds)
        ind = eval_expr(estimand.condition_expr, ds)
        den = float(probs @ ind)
        if den <= 0:
            raise OutOfRange("conditioning event has zero target probability")
        return float(probs @ (ind * h)) / den
    raise ContinuousSupport(
        f"no enumeration oracle for {type(estimand).__name__}; "
        "use the Monte Carlo oracle"
    )


def simulate_synthetic(n, seed, x1_pmf=X1_PMF, x2_p=X2_P):
    """Draw the selection study; returns (full with R, observed R=1 rows)."""
    if n < 1:
        raise OutOfRange("need n >= 1")
    rng = np.random.default_rng(seed)
    x1 = rng.choice(3, size=n, p=np.asarray(x1_pmf, dtype=float))
    x2 = (rng.random(n) < x2_p).astype(int)
    a = (rng.random(n) < _sigmoid(x2 - x1)).astype(int)
    y = (rng.random(n) < _sigmoid(2 * a - x1 + x2)).astype(int)
    y2 = (rng.random(n) < _sigmoid((x1 + x2) / 2.0 - a)).astype(int)
    r = (rng.random(n) < _sigmoid(x1 - x2)).astype(int)
    cols = [
        ColumnSpec("Y", DISCRETE, 2),
        ColumnSpec("Y2", DISCRETE, 2),
        ColumnSpec("A", DISCRETE, 2),
        ColumnSpec("X1", DISCRETE, 3),
        ColumnSpec("X2", DISCRETE, 2),
        ColumnSpec("R", DISCRETE, 2),
    ]
    full = Dataset(cols, np.column_stack([y, y2, a, x1, x2, r]).astype(float))
    keep = np.nonzero(r == 1)[0]
    observed = Dataset(cols[:-1], full.values[keep][:, :-1])
    return full, observed


def simulate_regression_substitute(n, seed):
    """Draw the regression substitute; returns (full with R, observed).

    Columns: YC (continuous), YB, A, X1, X1_1, X1_2, X2, R; the one-hot
    X1 indicators are materialized so design matrices can reference them.
    """
    if n < 1:
        raise OutOfRange("need n >= 1")
    rng = np.random.default_rng(seed)
    x1 = rng.choice(3, size=n, p=np.asarray(_REG["x1_pmf"], dtype=float))
    x2 = (rng.random(n) < _REG["x2_p"]).astype(int)
    b = _REG["treat"]
    a = (rng.random(n) < _sigmoid(b[0] + b[1] * x1 + b[2] * x2)).astype(int)
    x11 = (x1 == 1).astype(int)
    x12 = (x1 == 2).astype(int)
    c = _REG["linear"]
    yc = (
        c[0] + c[1] * a + c[2] * x11 + c[3] * x12 + c[4] * x2
        + rng.normal(0.0, _REG["linear_sd"], size=n)
    )
    d = _REG["binary"]
    yb = (
        rng.random(n) < _sigmoid(d[0] + d[1] * a + d[2] * x11 + d[3] * x12 + d[4] * x2)
    ).astype(int)
    s = _REG["select"]
    r = (rng.random(n) < _sigmoid(s[0] + s[1] * x1 + s[2] * x2)).astype(int)
    cols = [
        ColumnSpec("YC", CONTINUOUS, 0),
        ColumnSpec("YB", DISCRETE, 2),
        ColumnSpec("A", DISCRETE, 2),
        ColumnSpec("X1", DISCRETE, 3),
        ColumnSpec("X1_1", DISCRETE, 2),
        ColumnSpec("X1_2", DISCRETE, 2),
        ColumnSpec("X2", DISCRETE, 2),
        ColumnSpec("R", DISCRETE, 2),
    ]
    values = np.column_stack([yc, yb, a, x1, x11, x12, x2, r]).astype(float)
    full = Dataset(cols, values)
    keep = np.nonzero(r == 1)[0]
    observed = Dataset(cols[:-1], full.values[keep][:, :-1])
    return full, observed


def substitute_cell_targets():
    """Exact P masses of the (X1, X2) cells for the regression substitute.

    The covariate marginal is discrete even though the outcome is not, so
    pinning constraints get exact targets.
    """
    out = {}
    pmf = _REG["x1_pmf"]
    for x1 in (0, 1, 2):
        for x2 in (0, 1):
            px2 = _REG["x2_p"] if x2 == 1 else 1 - _REG["x2_p"]
            out[(x1, x2)] = pmf[x1] * px2
    return out


def substitute_selection_rate():
    """Exact Pr(R=1) for the regression substitute (selection is on X1, X2)."""
    s = _REG["select"]
    rate = 0.0
    for (x1, x2), p in substitute_cell_targets().items():
        rate += p * _sigmoid(s[0] + s[1] * x1 + s[2] * x2)
    return float(rate)


def mc_true_coefficient(family, n=1_000_000, seed=20_000_000):
    """Monte Carlo oracle for the substitute's A-coefficient, with its SE.

    Fits the unweighted regression on a large target-law draw (no
    selection), matching what the bounded coefficient converges to.
    """
    from .mestim import LOGISTIC, weighted_logistic, weighted_ols

    full, _ = simulate_regression_substitute(n, seed)
    design = np.column_stack(
        [np.ones(n)] + [full.column(c) for c in ("A", "X1_1", "X1_2", "X2")]
    )
    ones = np.ones(n)
    if family == LOGISTIC:
        fit = weighted_logistic(design, full.column("YB"), ones)
        # information is n * hessian for the mean logistic loss
        se = float(np.sqrt(np.linalg.inv(fit.hessian)[1, 1] / n))
    else:
        fit = weighted_ols(design, full.column("YC"), ones)
        resid = full.column("YC") - design @ fit.beta
        cov = np.var(resid) * np.linalg.inv(design.T @ design)
        se = float(np.sqrt(cov[1, 1]))
    return float(fit.beta[1]), se
