import itertools

import numpy as np
import pytest

from robustnav.lp import LpProblem, LpSolution, LpStatus, lp_duality_gap, lp_solve


def vertex_oracle(prob: LpProblem):
    """Exhaustive basic-feasible-point enumeration for tiny LPs (n <= 3)."""
    n = prob.n_vars
    rows = [(a, b) for a, b in zip(prob.ineq_matrix, prob.ineq_rhs)]
    for j in range(n):
        if np.isfinite(prob.var_lower[j]):
            e = np.zeros(n)
            e[j] = -1.0
            rows.append((e, -prob.var_lower[j]))
        if np.isfinite(prob.var_upper[j]):
            e = np.zeros(n)
            e[j] = 1.0
            rows.append((e, prob.var_upper[j]))
    eq_rows = [(a, b) for a, b in zip(prob.eq_matrix, prob.eq_rhs)]
    need = n - len(eq_rows)
    best = np.inf
    best_x = None
    for active in itertools.combinations(range(len(rows)), need):
        A = np.array([rows[i][0] for i in active] + [a for a, _ in eq_rows])
        b = np.array([rows[i][1] for i in active] + [v for _, v in eq_rows])
        if A.shape[0] != n or abs(np.linalg.det(A)) < 1e-10:
            continue
        x = np.linalg.solve(A, b)
        ok = all(a @ x <= b_ + 1e-9 for a, b_ in rows) and all(
            abs(a @ x - b_) <= 1e-9 for a, b_ in eq_rows
        )
        if ok:
            val = prob.cost @ x
            if val < best - 1e-12:
                best, best_x = val, x
    return best, best_x


def random_feasible_lp(rng, n, m, with_eq=False):
    """Random LP guaranteed feasible via a known interior point."""
    A = rng.normal(size=(m, n))
    x0 = rng.uniform(-1.0, 1.0, size=n)
    b = A @ x0 + rng.uniform(0.2, 1.5, size=m)
    c = rng.normal(size=n)
    lo = np.full(n, -5.0)
    hi = np.full(n, 5.0)
    kw = {}
    if with_eq and n >= 2:
        g = rng.normal(size=(1, n))
        kw = {"eq_matrix": g, "eq_rhs": g @ x0}
    return LpProblem(cost=c, ineq_matrix=A, ineq_rhs=b, var_lower=lo, var_upper=hi, **kw)


def test_box_corner_optimum():
    prob = LpProblem(
        cost=[-1.0, -1.0],
        ineq_matrix=[[1.0, 0.0], [0.0, 1.0]],
        ineq_rhs=[1.0, 1.0],
        var_lower=[0.0, 0.0],
    )
    sol = lp_solve(prob)
    assert sol.status is LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(-2.0, abs=1e-10)
    assert np.allclose(sol.primal, [1.0, 1.0], atol=1e-10)
    assert lp_duality_gap(sol, prob) <= 1e-10


def test_contradictory_bounds_infeasible():
    prob = LpProblem(
        cost=[1.0],
        ineq_matrix=[[1.0]],
        ineq_rhs=[-1.0],
        var_lower=[0.0],
    )
    sol = lp_solve(prob)
    assert sol.status is LpStatus.INFEASIBLE
    assert sol.farkas is not None


def test_unbounded_ray():
    prob = LpProblem(cost=[-1.0], var_lower=[0.0])
    sol = lp_solve(prob)
    assert sol.status is LpStatus.UNBOUNDED
    assert sol.ray is not None
    assert prob.cost @ sol.ray < 0


def test_three_var_matches_vertex_enumeration():
    rng = np.random.default_rng(7)
    for _ in range(60):
        prob = random_feasible_lp(rng, n=3, m=int(rng.integers(2, 9)))
        sol = lp_solve(prob)
        assert sol.status is LpStatus.OPTIMAL
        ref, _ = vertex_oracle(prob)
        assert sol.objective == pytest.approx(ref, abs=1e-8)


def test_scaling_invariance_of_gap():
    prob = LpProblem(
        cost=[-1.0, -1.0],
        ineq_matrix=[[10.0, 0.0], [0.0, 10.0]],
        ineq_rhs=[10.0, 10.0],
        var_lower=[0.0, 0.0],
    )
    sol = lp_solve(prob)
    assert lp_duality_gap(sol, prob) <= 1e-8 * (1 + abs(sol.objective))


def test_random_batch_strong_duality():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(150):
        n = int(rng.integers(2, 12))
        m = int(rng.integers(1, 15))
        prob = random_feasible_lp(rng, n, m, with_eq=bool(rng.integers(0, 2)))
        sol = lp_solve(prob)
        assert sol.status is LpStatus.OPTIMAL
        gap = lp_duality_gap(sol, prob)
        worst = max(worst, gap / (1 + abs(sol.objective)))
    assert worst <= 1e-8


def test_certificate_invariants():
    rng = np.random.default_rng(3)
    for _ in range(50):
        prob = random_feasible_lp(rng, 4, 6)
        sol = lp_solve(prob)
        x = sol.primal
        assert np.max(prob.ineq_matrix @ x - prob.ineq_rhs, initial=0.0) <= 1e-8
        assert np.all(sol.dual_ineq >= -1e-10)
        slack = prob.ineq_rhs - prob.ineq_matrix @ x
        assert np.max(np.abs(sol.dual_ineq * slack), initial=0.0) <= 1e-6


def test_equality_constraints():
    prob = LpProblem(
        cost=[1.0, 2.0],
        eq_matrix=[[1.0, 1.0]],
        eq_rhs=[1.0],
        var_lower=[0.0, 0.0],
    )
    sol = lp_solve(prob)
    assert sol.status is LpStatus.OPTIMAL
    assert np.allclose(sol.primal, [1.0, 0.0], atol=1e-9)


def test_free_variable_split():
    prob = LpProblem(
        cost=[1.0],
        ineq_matrix=[[-1.0]],
        ineq_rhs=[1.0],
        var_lower=[-np.inf],
    )
    sol = lp_solve(prob)
    assert sol.status is LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(-1.0, abs=1e-9)


def test_determinism_bitwise():
    rng = np.random.default_rng(11)
    prob = random_feasible_lp(rng, 5, 7)
    a = lp_solve(prob)
    b = lp_solve(prob)
    assert a.objective == b.objective
    assert np.array_equal(a.primal, b.primal)
    assert np.array_equal(a.dual_ineq, b.dual_ineq)


def test_dump_roundtrippable_text():
    prob = LpProblem(cost=[1.0], ineq_matrix=[[1.0]], ineq_rhs=[2.0], var_lower=[0.0])
    text = prob.dump()
    assert "min" in text and "<=" in text


def test_shape_validation():
    with pytest.raises(ValueError):
        LpProblem(cost=[1.0, 2.0], ineq_matrix=[[1.0]], ineq_rhs=[1.0])
    with pytest.raises(ValueError):
        LpProblem(cost=[np.inf])
