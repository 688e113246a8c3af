"""Distributionally robust benchmark bounds over chi-square balls.

The benchmark relaxes the structured ratio problem to "any reweighting
whose chi-square divergence from the nominal law is at most rho". For a
stratum mean that worst case has a water-filling form: tilt weights
proportionally to max(0, 1 + (h - eta) / (2 gamma)), where eta centers
the tilt to keep total mass one and gamma trades objective against
divergence. Both scalars come from nested bisections, so the bound is
deterministic and needs no iterative solver.

Two radius calibrations are provided. The observable one maximizes the
divergence over ratios that satisfy the declared constraints, so the
resulting ball is a covering ball for the structured set. The omniscient
one compares the generator's target law against the empirical weights
directly and is available only in synthetic studies. Conditional
estimands reuse the mean machinery on the conditioned subsample with a
radius calibrated on the joint weights; the benchmark construction for
that case is a stated reading, not settled convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ConditionalMean, eval_expr
from .errors import (
    DimensionMismatch,
    EmptyConditionSet,
    InnerDivergence,
    NegativeRho,
    NoFeasiblePointFound,
    OutOfRange,
    SupportViolation,
)

_MASS_TOL = 1e-9
_GAMMA_LO = 1e-12
_GAMMA_HI = 1e9


def chi2_divergence(p, q):
    """sum q (p/q - 1)^2 for distributions on a shared finite support."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatch("p and q must have equal length")
    if np.any(p < 0) or np.any(q < 0):
        raise OutOfRange("probabilities must be nonnegative")
    if abs(p.sum() - 1.0) > _MASS_TOL or abs(q.sum() - 1.0) > _MASS_TOL:
        raise OutOfRange("p and q must each sum to one")
    off = (q <= 0) & (p > 0)
    if np.any(off):
        raise SupportViolation(
            f"{int(off.sum())} cells carry target mass but no nominal mass"
        )
    live = q > 0
    return float(np.sum(q[live] * (p[live] / q[live] - 1.0) ** 2))


@dataclass(frozen=True)
class DroSpec:
    """A worst-case stratum-mean problem over a chi-square ball."""

    weights: np.ndarray
    values: np.ndarray
    rho: float
    side: str = "upper"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        h = np.asarray(self.values, dtype=float)
        if w.shape != h.shape or w.ndim != 1 or w.size == 0:
            raise DimensionMismatch("weights and values must be equal-length 1-d")
        if np.any(w < 0) or abs(w.sum() - 1.0) > _MASS_TOL:
            raise OutOfRange("weights must be a probability vector")
        if self.rho < 0:
            raise NegativeRho(f"rho must be nonnegative, got {self.rho}")
        if self.side not in ("lower", "upper"):
            raise OutOfRange(f"side must be 'lower' or 'upper', got {self.side!r}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "values", h)


def _tilt_center(w, h, gamma):
    """eta such that the water-filling tilt has total mass one."""
    lo = float(h.min()) - 2.0 * gamma - 1.0
    hi = float(h.max()) + 2.0 * gamma + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        total = float(w @ np.maximum(0.0, 1.0 + (h - mid) / (2.0 * gamma)))
        if total > 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _tilt_at(w, h, gamma):
    """(divergence, tilted mean) at the mass-one water-filling tilt."""
    eta = _tilt_center(w, h, gamma)
    r = np.maximum(0.0, 1.0 + (h - eta) / (2.0 * gamma))
    return float(w @ (r - 1.0) ** 2), float(w @ (r * h))


def dro_mean_bound(spec):
    """Worst-case mean over the chi-square ball; exact at rho = 0."""
    w, h, rho = spec.weights, spec.values, spec.rho
    live = w > 0
    w, h = w[live], h[live]
    nominal = float(w @ h)
    if rho == 0.0 or h.max() - h.min() <= 0:
        return nominal
    sign = 1.0 if spec.side == "upper" else -1.0
    hh = sign * h
    # the divergence cap: all mass on the argmax set of hh
    top = hh >= hh.max() - 1e-15
    w_top = float(w[top].sum())
    cap = (1.0 - w_top) / w_top
    if rho >= cap:
        return float(sign * hh.max())
    glo, ghi = _GAMMA_LO, _GAMMA_HI
    for _ in range(300):
        gamma = np.sqrt(glo * ghi)
        div, _ = _tilt_at(w, hh, gamma)
        if div > rho:
            glo = gamma
        else:
            ghi = gamma
    _, tilted = _tilt_at(w, hh, np.sqrt(glo * ghi))
    return float(sign * tilted)


def dro_interval(weights, values, rho):
    """(lower, upper) worst-case means at the same radius."""
    lo = dro_mean_bound(DroSpec(weights, values, rho, side="lower"))
    hi = dro_mean_bound(DroSpec(weights, values, rho, side="upper"))
    return lo, hi


def subsample_nominal(spec, strata):
    """Nominal subsample law for the spec's conditioning event.

    Returns (subsample stratum weights, subsample h values, live mask over
    strata). For unconditional estimands the event is the whole sample.
    """
    ds = spec.dataset
    est = spec.estimand
    if isinstance(est, ConditionalMean):
        ind = eval_expr(est.condition_expr, ds)
        h = eval_expr(est.h_expr, ds)
    else:
        ind = np.ones(ds.n)
        h = eval_expr(est.h_expr, ds)
    ind_bar = strata.stratum_means(ind)
    mass = strata.weights * ind_bar
    total = float(mass.sum())
    if total <= 0:
        raise EmptyConditionSet("conditioning event is empty in the sample")
    live = mass > 0
    # mean of h over the event rows within each live stratum
    num = strata.stratum_means(ind * h)
    h_sub = num[live] / ind_bar[live]
    return mass[live] / total, h_sub, live


def divergence_under(theta, strata):
    """Chi-square divergence of the reweighted law from the nominal one.

    Equals sum w (theta - 1)^2 when the ratio is exactly normalized; the
    explicit renormalization keeps the diagnostic meaningful at near-
    feasible iterates too.
    """
    w = strata.weights
    b = float(w @ theta)
    if b <= 0:
        raise OutOfRange("ratio carries no mass")
    return chi2_divergence(w * theta / b, w)


class _DivergenceObjective:
    """Adapter giving the AL inner solver sum w (theta - 1)^2 to climb."""

    def __init__(self, base):
        # reuse the estimand objective's precomputed pieces
        self.spec = base.spec
        self.model = base.model
        self.strata = base.strata
        self.jac = base.jac
        self.w = base.w
        self.a_eq = base.a_eq
        self.targets = base.targets
        self.signs = base.signs
        self._base = base

    def theta(self, alpha):
        return self.jac.T @ alpha

    def value_grad(self, alpha):
        theta = self.theta(alpha)
        gap = theta - 1.0
        # runaway iterates overflow to inf here; the inner solver treats
        # a non-finite value as divergence, so let it through quietly
        with np.errstate(over="ignore"):
            return float(self.w @ gap**2), self.jac @ (2.0 * self.w * gap)

    def residuals(self, alpha):
        return self._base.residuals(alpha)

    def sign_penalties(self, alpha):
        return self._base.sign_penalties(alpha)

    def floor_penalty(self, alpha):
        return self._base.floor_penalty(alpha)


def rho_observable(spec, strata, settings=None, extra_starts=()):
    """Largest divergence any constraint-feasible ratio induces.

    A covering radius for the constrained set, found by gradient ascent
    (the objective is convex, so this is a lower estimate of the true
    max, which errs in the benchmark's favor). Ascent shares the
    augmented-Lagrangian machinery with the bound solver; pass the
    optimizing parameter vectors of already-solved bounds as extra starts
    so the calibrated ball is guaranteed to contain them.
    """
    from .ratios import LINEAR_BASIS, init_uniform, project_floor
    from .solver import SolverSettings, _inner_solve, _Objective

    settings = settings or SolverSettings()
    obj = _DivergenceObjective(_Objective(spec, strata))
    starts = []
    for r in range(settings.restarts):
        rng = np.random.default_rng(settings.seed + r)
        a = init_uniform(spec.ratio_model, strata)
        a = a + rng.uniform(-0.1, 0.1, size=a.size)
        if obj.model.kind != LINEAR_BASIS:
            a = project_floor(spec.ratio_model, a, strata)
        starts.append(a)
    starts.extend(np.asarray(a, dtype=float).copy() for a in extra_starts)

    def viol_at(a):
        c = obj.residuals(a)
        _, _, sign_viol = obj.sign_penalties(a)
        _, _, floor_viol = obj.floor_penalty(a)
        return max(float(np.abs(c).max()), sign_viol, floor_viol)

    # the radius is a maximum, so every feasible iterate is a valid lower
    # witness; keep the best seen rather than trusting the final point of
    # any one penalty trajectory (vertex seeds can be the global max yet
    # unstable under the penalty dynamics)
    best = -np.inf
    for alpha in starts:
        if viol_at(alpha) <= settings.constraint_tol:
            best = max(best, obj.value_grad(alpha)[0])
        lam = np.zeros(obj.targets.size)
        mu = settings.penalty_mu
        prev_viol = np.inf
        value = np.nan
        for _ in range(settings.max_outer):
            try:
                alpha, _, inner_ok = _inner_solve(obj, alpha, lam, mu, -1.0, settings)
            except InnerDivergence:
                # maximizing a convex function can run away along an
                # unconstrained face; the witnesses so far still stand
                break
            viol = viol_at(alpha)
            new_value = obj.value_grad(alpha)[0]
            if viol <= settings.constraint_tol and np.isfinite(new_value):
                best = max(best, float(new_value))
                if inner_ok and np.isfinite(value) and abs(new_value - value) <= 1e-9:
                    break
            value = new_value
            lam = lam + mu * obj.residuals(alpha)
            if viol > 0.25 * prev_viol:
                mu = min(mu * settings.mu_growth, settings.mu_cap)
            prev_viol = viol
    if not np.isfinite(best):
        raise NoFeasiblePointFound(
            "no feasible ratio found while calibrating the observable radius"
        )
    return float(best)


_OMNISCIENT_MISS_TOL = 0.01


def rho_omniscient(dgp, strata=None):
    """Divergence of the generator's target law from the nominal law.

    With no strata: the exact population divergence between the target
    and observed laws over the generator's full support. With an
    empirical stratum table: exact target-cell probabilities against the
    empirical weights. Rare support cells are routinely absent from
    finite samples; their (tiny) target mass is renormalized away so the
    divergence stays finite, but more than _OMNISCIENT_MISS_TOL of
    missing mass, or a sampled stratum impossible under the generator,
    raises SupportViolation.
    """
    if strata is None:
        _, probs, select = dgp.cell_table()
        q = probs * select
        return chi2_divergence(probs, q / q.sum())
    profiles = [tuple(int(v) for v in s.profile) for s in strata.strata]
    p = np.array([dgp.cell_probability(pr) for pr in profiles])
    if np.any(p <= 0):
        raise SupportViolation(
            "sampled stratum has zero probability under the generator"
        )
    missing = 1.0 - p.sum()
    if missing > _OMNISCIENT_MISS_TOL:
        raise SupportViolation(
            f"sampled strata miss {missing:.2e} of the target mass"
        )
    return chi2_divergence(p / p.sum(), strata.weights)
