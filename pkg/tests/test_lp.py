import numpy as np
import pytest

from bisimdist.lp import LpProblem, solve_lp

from helpers import lp_vertices


def test_max_single_bound():
    p = LpProblem([1.0], "max")
    p.add({0: 1.0}, "<=", 3.0)
    sol = solve_lp(p)
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(3.0)


def test_infeasible():
    p = LpProblem([1.0], "min")
    p.add({0: 1.0}, ">=", 2.0)
    p.add({0: 1.0}, "<=", 1.0)
    assert solve_lp(p).status == "infeasible"
    assert solve_lp(p, method="highs").status == "infeasible"


def test_unbounded():
    p = LpProblem([1.0, 1.0], "max")
    p.add({0: 1.0, 1: -1.0}, "<=", 1.0)
    assert solve_lp(p).status == "unbounded"


def test_degenerate_objective_one():
    p = LpProblem([1.0, 1.0], "max")
    p.add({0: 1.0, 1: 1.0}, "<=", 1.0)
    sol = solve_lp(p)
    assert sol.objective == pytest.approx(1.0)
    assert p.violation(sol.x) <= 1e-7


def test_equalities_and_free_variables():
    # min x0 + 2 x1 with x0 - x1 = 1, x1 free, x0 in [0, 5]
    p = LpProblem([1.0, 2.0], "min", lower=[0.0, None], upper=[5.0, None])
    p.add({0: 1.0, 1: -1.0}, "=", 1.0)
    sol = solve_lp(p)
    assert sol.status == "optimal"
    np.testing.assert_allclose(sol.x, [0.0, -1.0], atol=1e-12)


def test_dimension_mismatch():
    p = LpProblem([1.0], "min")
    p.add({3: 1.0}, "<=", 1.0)
    with pytest.raises(ValueError, match="dimension"):
        solve_lp(p)


def test_unknown_relation():
    with pytest.raises(ValueError):
        LpProblem([1.0]).add({0: 1.0}, "<", 1.0)


def random_bounded_lp(rng, n, m):
    a = rng.normal(size=(m, n))
    lo = np.where(rng.random(n) < 0.3, -rng.random(n), 0.0)
    hi = lo + rng.uniform(0.5, 3.0, size=n)
    # keep a random interior point feasible
    x = lo + rng.random(n) * (hi - lo)
    b = a @ x + rng.random(m)
    c = rng.normal(size=n)
    return a, b, lo, hi, c, x


def as_problem(a, b, lo, hi, c, mixed, rng):
    p = LpProblem(c, "min", lower=list(lo), upper=list(hi))
    for row, rhs in zip(a, b):
        if mixed and rng.random() < 0.5:
            p.add({j: -v for j, v in enumerate(row)}, ">=", -rhs)
        else:
            p.add(dict(enumerate(row)), "<=", rhs)
    return p


def test_against_vertex_enumeration():
    rng = np.random.default_rng(2)
    for k in range(150):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(1, 5))
        a, b, lo, hi, c, x = random_bounded_lp(rng, n, m)
        verts = lp_vertices(a, b, lo, hi)
        best = min(float(c @ v) for v in verts)
        sol = solve_lp(as_problem(a, b, lo, hi, c, k % 2 == 1, rng))
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(best, abs=1e-7)
        assert as_problem(a, b, lo, hi, c, False, rng).violation(sol.x) <= 1e-7


def test_against_highs_up_to_eight_variables():
    rng = np.random.default_rng(9)
    for _ in range(100):
        n = int(rng.integers(1, 9))
        m = int(rng.integers(1, 9))
        a, b, lo, hi, c, x = random_bounded_lp(rng, n, m)
        p = as_problem(a, b, lo, hi, c, True, rng)
        if rng.random() < 0.3:
            # an equality through the known feasible interior point
            row = rng.normal(size=n)
            p.add(dict(enumerate(row)), "=", float(row @ x))
        ours, ref = solve_lp(p), solve_lp(p, method="highs")
        assert ours.status == ref.status == "optimal"
        assert ours.objective == pytest.approx(ref.objective, abs=1e-7)
        assert p.violation(ours.x) <= 1e-7


def test_deterministic():
    rng = np.random.default_rng(4)
    a, b, lo, hi, c, x = random_bounded_lp(rng, 6, 5)
    p = as_problem(a, b, lo, hi, c, True, rng)
    first, second = solve_lp(p), solve_lp(p)
    np.testing.assert_array_equal(first.x, second.x)
    assert first.iterations == second.iterations


def test_start_at_upper_bounds():
    # feasible at the all-upper vertex, so the start skips phase 1
    rng = np.random.default_rng(8)
    n = 6
    a = -rng.random((4, n))
    p = LpProblem(np.ones(n), "min", lower=[0.0] * n, upper=[1.0] * n)
    for row in a:
        p.add(dict(enumerate(-row)), ">=", 0.5)
    cold, warm = solve_lp(p), solve_lp(p, start=["upper"] * n)
    assert warm.objective == pytest.approx(cold.objective, abs=1e-10)
    with pytest.raises(ValueError):
        solve_lp(p, start=["upper"])


def test_degenerate_cycling_prone_instance():
    # Beale's classic cycling example
    p = LpProblem([-0.75, 150.0, -0.02, 6.0], "min")
    p.add({0: 0.25, 1: -60.0, 2: -0.04, 3: 9.0}, "<=", 0.0)
    p.add({0: 0.5, 1: -90.0, 2: -0.02, 3: 3.0}, "<=", 0.0)
    p.add({2: 1.0}, "<=", 1.0)
    sol = solve_lp(p)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-0.05, abs=1e-9)
