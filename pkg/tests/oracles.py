"""Independent reference computations for the tests.

Everything here reaches an answer by a different route than the library:
brute-force vertex enumeration for LPs, dense grids for fractional programs
and divergence balls, and central finite differences for implicit
gradients. Slow and dumb on purpose.
"""

import itertools

import numpy as np

from shiftbound.data import (
    CONTINUOUS,
    DISCRETE,
    ColumnSpec,
    Dataset,
    Mean,
    ProblemSpec,
    build_strata,
    moment,
    normalization_constraint,
)
from shiftbound.mestim import weighted_logistic, weighted_ols
from shiftbound.ratios import tabular, theta_values


def enumerate_bfs(lp):
    """(status, value) by enumerating basic feasible solutions.

    Valid for bounded feasible regions (every instance built here carries a
    positive normalization row, so the shifted polytope is a simplex slice).
    Redundant rows are dropped greedily; candidates are checked against the
    full system so inconsistent duplicates still read as infeasible.
    """
    a_full = lp.a_eq
    b_full = lp.b_eq - a_full @ lp.lower_bounds
    keep = []
    for i in range(a_full.shape[0]):
        trial = keep + [i]
        if np.linalg.matrix_rank(a_full[trial]) == len(trial):
            keep = trial
    a = a_full[keep]
    b = b_full[keep]
    m, n = a.shape
    lo = hi = None
    for cols in itertools.combinations(range(n), m):
        bmat = a[:, cols]
        if abs(np.linalg.det(bmat)) < 1e-11:
            continue
        xb = np.linalg.solve(bmat, b)
        if np.any(xb < -1e-9):
            continue
        x = np.zeros(n)
        x[list(cols)] = np.maximum(xb, 0.0)
        if np.max(np.abs(a_full @ x - b_full), initial=0.0) > 1e-7:
            continue
        v = float(lp.objective @ (lp.lower_bounds + x))
        lo = v if lo is None else min(lo, v)
        hi = v if hi is None else max(hi, v)
    if lo is None:
        return "Infeasible", np.nan
    return "Optimal", lo if lp.sense == "min" else hi


def stratified_dataset(rng, n_strata, n_moments=2, max_rows=6, condition=False):
    """Rows grouped into strata with per-stratum-constant payload columns.

    Columns: S (stratum id), H (outcome), G0..G_{k-1} (moment functions),
    and optionally C (condition indicator). Constant payloads make stratum
    means exact, so targets and oracles can be computed by hand.
    """
    counts = rng.integers(1, max_rows + 1, size=n_strata)
    h = rng.normal(size=n_strata)
    g = rng.normal(size=(n_moments, n_strata))
    cond = None
    if condition:
        cond = np.zeros(n_strata, dtype=int)
        cond[rng.choice(n_strata, size=rng.integers(1, n_strata), replace=False)] = 1
    cols = [ColumnSpec("S", DISCRETE, n_strata), ColumnSpec("H", CONTINUOUS, 0)]
    cols += [ColumnSpec(f"G{j}", CONTINUOUS, 0) for j in range(n_moments)]
    if condition:
        cols.append(ColumnSpec("C", DISCRETE, 2))
    rows = []
    for s in range(n_strata):
        for _ in range(counts[s]):
            row = [s, h[s], *g[:, s]]
            if condition:
                row.append(cond[s])
            rows.append(row)
    ds = Dataset(cols, np.array(rows, dtype=float))
    w = counts / counts.sum()
    return ds, w, h, g, cond


def feasible_point(rng, w, floor):
    """A theta with sum(w * theta) = 1 and theta >= floor."""
    u = rng.uniform(0.2, 1.0, size=len(w))
    return floor + u * (1.0 - floor) / float(w @ u)


def mean_spec(ds, moments, floor, side="lower"):
    model = tabular(("S",), floor=floor)
    cons = (normalization_constraint(), *moments)
    return ProblemSpec(ds, cons, Mean("H"), model, side=side, floor=floor)


def pinned_targets(w, g, theta):
    """Moment targets that make ``theta`` feasible by construction."""
    return [
        moment(f"G{j}", float((w * g[j]) @ theta), name=f"g{j}")
        for j in range(g.shape[0])
    ]


def grid_conditional_bounds(w, h, cond, floor, step=1e-4):
    """Dense-grid extremes of sum_C(w h theta) / sum_C(w theta).

    Normalization is substituted into the last coordinate, the rest run on
    a grid with the given step; handles 2 or 3 strata.
    """
    w = np.asarray(w, dtype=float)
    h = np.asarray(h, dtype=float)
    c = np.asarray(cond, dtype=float)
    lo, hi = np.inf, -np.inf
    if len(w) == 2:
        t1_max = (1.0 - floor * w[1]) / w[0]
        t1 = np.arange(floor, t1_max + step, step)
        t2 = (1.0 - w[0] * t1) / w[1]
        ok = t2 >= floor - 1e-12
        t1, t2 = t1[ok], t2[ok]
        num = c[0] * w[0] * h[0] * t1 + c[1] * w[1] * h[1] * t2
        den = c[0] * w[0] * t1 + c[1] * w[1] * t2
        vals = num / den
        return float(vals.min()), float(vals.max())
    t1_max = (1.0 - floor * (w[1] + w[2])) / w[0]
    t2_max = (1.0 - floor * (w[0] + w[2])) / w[1]
    grid2 = np.arange(floor, t2_max + step, step)
    for t1 in np.arange(floor, t1_max + step, step):
        t3 = (1.0 - w[0] * t1 - w[1] * grid2) / w[2]
        ok = t3 >= floor - 1e-12
        if not np.any(ok):
            continue
        t2 = grid2[ok]
        t3 = t3[ok]
        num = c[0] * w[0] * h[0] * t1 + c[1] * w[1] * h[1] * t2 + c[2] * w[2] * h[2] * t3
        den = c[0] * w[0] * t1 + c[1] * w[1] * t2 + c[2] * w[2] * t3
        vals = num / den
        lo = min(lo, float(vals.min()))
        hi = max(hi, float(vals.max()))
    return lo, hi


def fd_hypergradient(model, strata, family, design, y, alpha, h_grad, eps=1e-5):
    """Central finite differences of h(beta*(theta_alpha)) in alpha."""

    def outer(a):
        theta_rows = theta_values(model, a, strata)[strata.row_to_stratum()]
        if family == "linear":
            fit = weighted_ols(design, y, theta_rows)
        else:
            fit = weighted_logistic(design, y, theta_rows)
        return float(h_grad @ fit.beta)

    grad = np.zeros(alpha.size)
    for k in range(alpha.size):
        e = np.zeros(alpha.size)
        e[k] = eps
        grad[k] = (outer(alpha + e) - outer(alpha - e)) / (2.0 * eps)
    return grad


def dro_two_atom_grid(w, h, rho, side, step=1e-6):
    """1-D dense grid over the reweighted mass of atom 0."""
    p1 = np.arange(0.0, 1.0 + step, step)
    div = (p1 - w[0]) ** 2 / w[0] + (p1 - w[0]) ** 2 / w[1]
    vals = p1 * h[0] + (1.0 - p1) * h[1]
    feas = vals[div <= rho + 1e-12]
    return float(feas.max() if side == "upper" else feas.min())
