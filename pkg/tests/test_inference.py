import numpy as np
import pytest
from scipy.stats import norm

from shiftbound.convex import solve_bound
from shiftbound.data import Mean, ProblemSpec, build_strata, moment, normalization_constraint
from shiftbound.errors import (
    AllReplicatesInfeasible,
    BadLevel,
    CrossedBounds,
    TooManyFolds,
)
from shiftbound.inference import (
    BoundEstimate,
    bootstrap_bounds,
    identification_interval,
    normal_ci,
    sample_split,
)
from shiftbound.ratios import tabular

from oracles import feasible_point, mean_spec, pinned_targets, stratified_dataset


def test_normal_ci_modes():
    se = np.sqrt(4.0 / 100.0)
    lo, hi = normal_ci(1.0, 4.0, 100, 0.95, mode="two")
    z2 = norm.ppf(0.975)
    assert lo == pytest.approx(1.0 - z2 * se)
    assert hi == pytest.approx(1.0 + z2 * se)
    z1 = norm.ppf(0.95)
    lo, hi = normal_ci(1.0, 4.0, 100, 0.95, mode="lower")
    assert (lo, hi) == (pytest.approx(1.0 - z1 * se), 1.0)
    lo, hi = normal_ci(1.0, 4.0, 100, 0.95, mode="upper")
    assert (lo, hi) == (1.0, pytest.approx(1.0 + z1 * se))


def test_normal_ci_rejects_bad_input():
    with pytest.raises(BadLevel):
        normal_ci(0.0, 1.0, 10, 1.5)
    with pytest.raises(BadLevel):
        normal_ci(0.0, 1.0, 10, 0.0)
    with pytest.raises(BadLevel):
        normal_ci(0.0, -1.0, 10, 0.9)
    with pytest.raises(BadLevel):
        normal_ci(0.0, 1.0, 0, 0.9)
    with pytest.raises(BadLevel):
        normal_ci(0.0, 1.0, 10, 0.9, mode="sideways")


def _estimate(side, value, sigma2=1.0, n=400):
    mode = "lower" if side == "lower" else "upper"
    return BoundEstimate(
        side=side,
        value=value,
        alpha_star=np.array([]),
        theta_star=np.array([]),
        duals=np.array([]),
        sigma2=sigma2,
        n=n,
        ci_level=0.95,
        ci=normal_ci(value, sigma2, n, 0.95, mode),
        diagnostics={"status": "Optimal"},
    )


def test_identification_interval_outer():
    lo = _estimate("lower", 0.4)
    hi = _estimate("upper", 0.7)
    iv = identification_interval(lo, hi, level=0.95)
    z = norm.ppf(0.95)
    assert iv.outer[0] == pytest.approx(0.4 - z * np.sqrt(1.0 / 400))
    assert iv.outer[1] == pytest.approx(0.7 + z * np.sqrt(1.0 / 400))
    assert iv.outer[0] < 0.4 < 0.7 < iv.outer[1]
    wider = identification_interval(lo, hi, level=0.99)
    assert wider.outer[0] < iv.outer[0]
    assert wider.outer[1] > iv.outer[1]


def test_identification_interval_crossed():
    with pytest.raises(CrossedBounds):
        identification_interval(_estimate("lower", 0.9), _estimate("upper", 0.2))


def test_sample_split_partitions():
    rng = np.random.default_rng(81)
    ds, *_ = stratified_dataset(rng, 4, max_rows=8)
    folds = sample_split(ds, 3, seed=5)
    assert len(folds) == 3
    sizes = [f.n for f in folds]
    assert sum(sizes) == ds.n
    assert max(sizes) - min(sizes) <= 1
    again = sample_split(ds, 3, seed=5)
    for f, g in zip(folds, again):
        assert np.array_equal(f.values, g.values)
    with pytest.raises(TooManyFolds):
        sample_split(ds, ds.n + 1, seed=0)


def _solve_fn(strata_key=("S",)):
    def fn(spec):
        strata = build_strata(spec.dataset, strata_key)
        lo = solve_bound(spec, strata)
        hi = solve_bound(spec.with_side("upper"), strata)
        if lo.diagnostics["status"] != "Optimal" or hi.diagnostics["status"] != "Optimal":
            return None
        return identification_interval(lo, hi)

    return fn


def test_bootstrap_bounds_deterministic():
    rng = np.random.default_rng(85)
    ds, w, h, g, _ = stratified_dataset(rng, 3, n_moments=1, max_rows=20)
    floor = 0.3
    theta0 = feasible_point(rng, w, floor)
    moms = pinned_targets(w, g[:1], theta0)
    spec = mean_spec(ds, moms, floor)
    ivs1, s1 = bootstrap_bounds(spec, b=8, seed=3, solve_fn=_solve_fn())
    ivs2, s2 = bootstrap_bounds(spec, b=8, seed=3, solve_fn=_solve_fn())
    assert s1 == s2
    assert len(ivs1) + s1["infeasible"] == 8
    assert s1["lower_band"][0] <= s1["lower_mean"] <= s1["lower_band"][1]
    assert s1["replicates"] == 8
    vals1 = [iv.lower.value for iv in ivs1]
    vals2 = [iv.lower.value for iv in ivs2]
    assert vals1 == vals2


def test_bootstrap_bounds_counts_infeasible():
    rng = np.random.default_rng(89)
    ds, w, h, g, _ = stratified_dataset(rng, 3, n_moments=1, max_rows=20)
    spec = mean_spec(ds, [moment("G0", 1e5, name="far")], 0.3)
    with pytest.raises(AllReplicatesInfeasible):
        bootstrap_bounds(spec, b=4, seed=0, solve_fn=_solve_fn())
    with pytest.raises(ValueError):
        bootstrap_bounds(spec, b=0, seed=0, solve_fn=_solve_fn())


def test_bound_estimate_interval_sanity():
    rng = np.random.default_rng(93)
    ds, w, h, g, _ = stratified_dataset(rng, 4, max_rows=20)
    strata = build_strata(ds, ("S",))
    spec = mean_spec(ds, (), 0.4)
    lo = solve_bound(spec, strata)
    hi = solve_bound(spec.with_side("upper"), strata)
    iv = identification_interval(lo, hi)
    assert iv.outer[0] <= lo.value
    assert iv.outer[1] >= hi.value
    assert iv.level == 0.95
