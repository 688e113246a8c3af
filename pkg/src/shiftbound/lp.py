"""Dense revised simplex for small equality-constrained LPs.

Problems have the form

    min/max  c' x   s.t.  A_eq x = b_eq,  x >= lb  (per-variable bounds),

which covers every LP built here: bound problems have tens of variables
(one per ratio-model parameter, plus the Charnes-Cooper scale), so a dense
implementation with full refactorization per pivot is both simple and fast
enough. Statuses are values, not exceptions: bootstrap replicates produce
infeasible systems in normal operation and the caller records them.

The variable shift x = lb + x' reduces to standard form (x' >= 0).
Dependent rows are eliminated up front by Gaussian reduction of [A | b]
(constraint sets routinely contain them: moment systems whose g's sum to
the normalization). Phase 1 then minimizes the sum of artificial variables
from an identity basis; because the kept rows are independent, surviving
zero-level artificials can always be swapped for a real column. Phase 2
runs Dantzig pricing, switching to Bland's rule after a pivot cap so
cycling cannot occur. All tie-breaks are by lowest index, making the pivot
sequence, and hence the returned optimizer, deterministic.

Duals y solve B^T y = c_B at the final basis. For a minimization they
satisfy c' x* = b_eq' y + sum_k rc_k lb_k with reduced costs
rc = c - A_eq' y, the bound term accounting for variables pinned at lb.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
CYCLE_LIMIT = "CycleLimitExceeded"

_FEAS_TOL = 1e-9
_RC_TOL = 1e-9
_DANTZIG_CAP = 2000
_PIVOT_CAP = 20000


@dataclass(frozen=True)
class LinearProgram:
    objective: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    lower_bounds: np.ndarray
    sense: str = "min"

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.objective, dtype=float))
        a = np.atleast_2d(np.asarray(self.a_eq, dtype=float))
        b = np.atleast_1d(np.asarray(self.b_eq, dtype=float))
        lb = np.atleast_1d(np.asarray(self.lower_bounds, dtype=float))
        if a.shape != (b.size, c.size) or lb.size != c.size:
            raise ValueError("inconsistent LP dimensions")
        if not np.all(np.isfinite(lb)):
            raise ValueError("lower bounds must be finite")
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be min/max, got {self.sense!r}")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "a_eq", a)
        object.__setattr__(self, "b_eq", b)
        object.__setattr__(self, "lower_bounds", lb)


@dataclass
class LPSolution:
    value: float
    primal: np.ndarray
    duals: np.ndarray
    status: str
    pivot_count: int = 0


def _pivot_loop(a, b, c, basis, start_pivots):
    """Minimize c'x over Ax=b, x>=0 starting from the given basis.

    Returns (status, x_basic, y, pivots); ``basis`` is mutated in place.
    """
    m = a.shape[0]
    pivots = start_pivots
    while True:
        bmat = a[:, basis]
        try:
            binv_b = np.linalg.solve(bmat, b)
            y = np.linalg.solve(bmat.T, c[basis])
        except np.linalg.LinAlgError:
            return INFEASIBLE, None, None, pivots
        rc = c - a.T @ y
        rc[basis] = 0.0
        if pivots < _DANTZIG_CAP:
            enter = int(np.argmin(rc))
            if rc[enter] >= -_RC_TOL:
                return OPTIMAL, binv_b, y, pivots
        else:
            negatives = np.nonzero(rc < -_RC_TOL)[0]
            if negatives.size == 0:
                return OPTIMAL, binv_b, y, pivots
            enter = int(negatives[0])  # Bland: lowest eligible index enters
        d = np.linalg.solve(bmat, a[:, enter])
        pos = d > _FEAS_TOL
        if not np.any(pos):
            return UNBOUNDED, binv_b, y, pivots
        ratios = np.full(m, np.inf)
        ratios[pos] = np.maximum(binv_b[pos], 0.0) / d[pos]
        best = ratios.min()
        # leaving row: among ties, lowest basis column index (Bland-safe)
        candidates = np.nonzero(ratios <= best + _FEAS_TOL)[0]
        leave_row = min(candidates, key=lambda r: basis[r])
        basis[leave_row] = enter
        pivots += 1
        if pivots >= _PIVOT_CAP:
            return CYCLE_LIMIT, None, None, pivots


def _independent_rows(a, b):
    """Indices of a maximal independent row subset of ``a``.

    Returns None when a dependent row is inconsistent with the rest, i.e.
    the equality system has no solution at all.
    """
    m = a.shape[0]
    rank = int(np.linalg.matrix_rank(a))
    if rank == m:
        return list(range(m))
    if np.linalg.matrix_rank(np.hstack([a, b[:, None]])) > rank:
        return None
    # column-pivoted QR of A^T ranks rows by independence; the first
    # ``rank`` pivots span the row space
    _, _, perm = qr(a.T, pivoting=True)
    return sorted(int(r) for r in perm[:rank])


def _failed(status, pivots, sense):
    value = np.nan
    if status == UNBOUNDED:
        value = -np.inf if sense == "min" else np.inf
    return LPSolution(value, np.array([]), np.array([]), status, pivots)


def simplex_solve(lp):
    """Solve the LP; see the module docstring for conventions."""
    sense_flip = -1.0 if lp.sense == "max" else 1.0
    c = sense_flip * lp.objective
    lb = lp.lower_bounds
    a_full = lp.a_eq
    b_full = lp.b_eq - a_full @ lb
    const = float(lp.objective @ lb)
    n = lp.objective.size

    if a_full.shape[0] == 0:
        keep = []
    else:
        keep = _independent_rows(a_full, b_full)
        if keep is None:
            return _failed(INFEASIBLE, 0, lp.sense)
    a = a_full[keep].copy()
    b = b_full[keep].copy()
    m = len(keep)
    if m == 0:
        if np.any(c < -_RC_TOL):
            return _failed(UNBOUNDED, 0, lp.sense)
        return LPSolution(const, lb.copy(), np.zeros(lp.b_eq.size), OPTIMAL, 0)

    # flip rows with negative rhs so the artificial basis is feasible
    neg = b < 0
    a[neg] *= -1.0
    b[neg] *= -1.0

    a1 = np.hstack([a, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    basis = list(range(n, n + m))
    status, xb, _, pivots = _pivot_loop(a1, b, c1, basis, 0)
    if status == CYCLE_LIMIT:
        return _failed(status, pivots, lp.sense)
    if status != OPTIMAL or float(c1[basis] @ xb) > 1e-7:
        return _failed(INFEASIBLE, pivots, lp.sense)

    # drive surviving zero-level artificials out; the rows are independent,
    # so each tableau row has a nonzero entry under some real column
    for row in range(m):
        if basis[row] < n:
            continue
        z = np.linalg.solve(a1[:, basis].T, np.eye(m)[row])
        tab = np.abs(z @ a1[:, :n])
        tab[[j for j in basis if j < n]] = 0.0
        enter = int(np.argmax(tab))
        if tab[enter] <= 1e-9:
            return _failed(INFEASIBLE, pivots, lp.sense)
        basis[row] = enter

    status, xb, y, pivots = _pivot_loop(a, b, c, basis, pivots)
    if status != OPTIMAL:
        return _failed(status, pivots, lp.sense)

    x = np.zeros(n)
    x[basis] = np.maximum(xb, 0.0)
    primal = lb + x
    value = sense_flip * (float(c @ x)) + const

    y = np.where(neg, -y, y)  # undo the row sign flips
    duals = np.zeros(lp.b_eq.size)
    duals[keep] = y  # dropped rows are implied by the kept ones: dual 0
    if lp.sense == "max":
        duals = -duals
    return LPSolution(value, primal, duals, OPTIMAL, pivots)
