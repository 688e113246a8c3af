import numpy as np
import pytest

from shiftbound.lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, simplex_solve

from oracles import enumerate_bfs


def _random_lp(rng, m, n, sense):
    """Bounded feasible instance: first row is a positive mass constraint."""
    a = rng.normal(size=(m, n))
    a[0] = rng.uniform(0.5, 2.0, size=n)
    lb = rng.uniform(-1.0, 1.0, size=n)
    x0 = lb + rng.uniform(0.1, 2.0, size=n)
    b = a @ x0
    c = rng.normal(size=n)
    return LinearProgram(c, a, b, lb, sense)


def test_matches_enumeration_small():
    rng = np.random.default_rng(7)
    for _ in range(120):
        m = rng.integers(1, 4)
        n = rng.integers(m + 1, 7)
        lp = _random_lp(rng, int(m), int(n), rng.choice(["min", "max"]))
        sol = simplex_solve(lp)
        status, value = enumerate_bfs(lp)
        assert sol.status == status == OPTIMAL
        assert sol.value == pytest.approx(value, abs=1e-8)
        assert np.allclose(lp.a_eq @ sol.primal, lp.b_eq, atol=1e-8)
        assert np.all(sol.primal >= lp.lower_bounds - 1e-9)


def test_duals_satisfy_strong_duality():
    rng = np.random.default_rng(11)
    for _ in range(80):
        m = int(rng.integers(1, 5))
        n = int(rng.integers(m + 1, 9))
        lp = _random_lp(rng, m, n, rng.choice(["min", "max"]))
        sol = simplex_solve(lp)
        assert sol.status == OPTIMAL
        # b'y plus the reduced-cost value at the lower bounds equals c'x*
        reduced = lp.objective - lp.a_eq.T @ sol.duals
        dual_value = float(lp.b_eq @ sol.duals + reduced @ lp.lower_bounds)
        assert dual_value == pytest.approx(sol.value, abs=1e-7)
        sign = 1.0 if lp.sense == "min" else -1.0
        assert np.all(sign * reduced >= -1e-7)


def test_redundant_rows_are_harmless():
    rng = np.random.default_rng(23)
    for _ in range(60):
        m = int(rng.integers(1, 4))
        n = int(rng.integers(m + 2, 8))
        lp = _random_lp(rng, m, n, rng.choice(["min", "max"]))
        # append two rows that are combinations of existing ones
        w1 = rng.normal(size=m)
        w2 = rng.normal(size=m)
        a2 = np.vstack([lp.a_eq, w1 @ lp.a_eq, w2 @ lp.a_eq])
        b2 = np.concatenate([lp.b_eq, [w1 @ lp.b_eq, w2 @ lp.b_eq]])
        base = simplex_solve(lp)
        padded = simplex_solve(LinearProgram(lp.objective, a2, b2, lp.lower_bounds, lp.sense))
        assert base.status == padded.status == OPTIMAL
        assert padded.value == pytest.approx(base.value, abs=1e-8)
        # only an independent subset of rows carries nonzero duals, and the
        # dual identity must still hold on the padded system
        assert int(np.sum(np.abs(padded.duals) > 1e-12)) <= m
        reduced = lp.objective - a2.T @ padded.duals
        dual_value = float(b2 @ padded.duals + reduced @ lp.lower_bounds)
        assert dual_value == pytest.approx(padded.value, abs=1e-7)


def test_inconsistent_dependent_row_is_infeasible():
    rng = np.random.default_rng(31)
    for _ in range(40):
        m = int(rng.integers(1, 4))
        n = int(rng.integers(m + 2, 8))
        lp = _random_lp(rng, m, n, "min")
        w = rng.normal(size=m)
        a2 = np.vstack([lp.a_eq, w @ lp.a_eq])
        b2 = np.concatenate([lp.b_eq, [w @ lp.b_eq + 0.37]])
        sol = simplex_solve(LinearProgram(lp.objective, a2, b2, lp.lower_bounds, "min"))
        assert sol.status == INFEASIBLE


def test_infeasible_by_sign():
    # sum of nonnegatives pinned to a negative total
    lp = LinearProgram(
        np.array([1.0, 1.0]),
        np.array([[1.0, 1.0]]),
        np.array([-2.0]),
        np.zeros(2),
        "min",
    )
    assert simplex_solve(lp).status == INFEASIBLE


def test_unbounded_direction():
    # maximize x1 with only x2 pinned
    lp = LinearProgram(
        np.array([1.0, 0.0]),
        np.array([[0.0, 1.0]]),
        np.array([1.0]),
        np.zeros(2),
        "max",
    )
    assert simplex_solve(lp).status == UNBOUNDED


def test_degenerate_vertices_terminate():
    rng = np.random.default_rng(43)
    for _ in range(40):
        m = int(rng.integers(2, 4))
        n = int(rng.integers(m + 1, 7))
        a = rng.normal(size=(m, n))
        a[0] = rng.uniform(0.5, 2.0, size=n)
        # put the right-hand side on a vertex touching extra bounds
        x0 = np.zeros(n)
        x0[: m - 1] = rng.uniform(0.5, 1.5, size=m - 1)
        b = a @ x0
        lp = LinearProgram(rng.normal(size=n), a, b, np.zeros(n), "min")
        sol = simplex_solve(lp)
        status, value = enumerate_bfs(lp)
        assert sol.status == status
        if status == OPTIMAL:
            assert sol.value == pytest.approx(value, abs=1e-8)


def test_fixed_point_when_no_rows():
    lp = LinearProgram(
        np.array([2.0, -1.0]),
        np.zeros((0, 2)),
        np.zeros(0),
        np.array([0.5, 1.5]),
        "min",
    )
    sol = simplex_solve(lp)
    assert sol.status == UNBOUNDED
    lp2 = LinearProgram(
        np.array([2.0, 1.0]),
        np.zeros((0, 2)),
        np.zeros(0),
        np.array([0.5, 1.5]),
        "min",
    )
    sol2 = simplex_solve(lp2)
    assert sol2.status == OPTIMAL
    assert sol2.value == pytest.approx(2.5)
    assert np.array_equal(sol2.primal, [0.5, 1.5])


def test_deterministic_pivots():
    rng = np.random.default_rng(5)
    lp = _random_lp(rng, 3, 8, "max")
    first = simplex_solve(lp)
    second = simplex_solve(lp)
    assert first.value == second.value
    assert first.pivot_count == second.pivot_count
    assert np.array_equal(first.primal, second.primal)


def test_normalization_plus_dependent_moment_rows():
    # one row equal to the sum of the others, consistent: the solver must
    # keep an independent subset and still satisfy every original row
    w = np.array([0.2, 0.3, 0.5])
    g = np.array(
        [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    theta0 = np.array([0.8, 1.2, 0.96])
    a_rows = [w]
    b_rows = [1.0]
    for j in range(3):
        a_rows.append(w * g[j])
        b_rows.append(float(w * g[j] @ theta0))
    a_rows.append(np.sum([w * g[j] for j in range(3)], axis=0))
    b_rows.append(float(sum(b_rows[1:])))
    a = np.array(a_rows)
    b = np.array(b_rows)
    for sense in ("min", "max"):
        sol = simplex_solve(LinearProgram(np.array([1.0, -2.0, 0.5]), a, b, np.full(3, 0.1), sense))
        assert sol.status == OPTIMAL
        assert np.allclose(a @ sol.primal, b, atol=1e-9)
