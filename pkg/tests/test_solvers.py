import math

import numpy as np
import pytest

from adarhd.benchmarks import make_robust, make_toy_quadratic
from adarhd.errors import DivergenceError, IndefiniteError
from adarhd.hypergradient import dense_solve, quad_value
from adarhd.manifolds import SPD, Euclidean
from adarhd.problem import BilevelProblem
from adarhd.solvers import (
    AdaState,
    adaptive_linear_solve_gd,
    adaptive_lower_solve,
    staged_cap_schedule,
    tscg_solve,
)

from helpers import linear_system_problem, random_spd_operator

X0 = np.zeros(1)


# ---- AdaState ----------------------------------------------------------

def test_adastate_update_rule():
    s = AdaState(2.0)
    assert s.accumulator == 4.0
    assert s.update(5.0) == pytest.approx(1 / 3)
    assert s.value == pytest.approx(3.0)
    s.reset()
    assert s.value == 2.0


def test_adastate_rejects_nonpositive_seed():
    with pytest.raises(ValueError):
        AdaState(0.0)


def test_adastate_monotone(rng):
    s = AdaState(0.1)
    steps = [s.update(v) for v in rng.exponential(size=50)]
    assert all(b <= a for a, b in zip(steps, steps[1:]))


def test_staged_cap_schedule():
    assert [staged_cap_schedule(t) for t in (0, 4, 5, 9, 10, 45, 49, 50, 1000)] == [
        50, 50, 100, 100, 150, 500, 500, 500, 500]


# ---- lower solve -------------------------------------------------------

def test_lower_solve_already_converged():
    pr = make_toy_quadratic(2, 2, C=np.diag([1.0, 2.0]))
    x = np.array([1.0, 1.0])
    y = np.array([1.0, 2.0])
    res = adaptive_lower_solve(pr, x, y, AdaState(1.0), 1e-8)
    assert res.iterations == 0 and res.solution is y and not res.cap_hit


def test_lower_solve_first_step_arithmetic():
    # g = 1/2 |y - C x|^2 with |grad|^2 = 5 at the start: b goes 2 -> 3
    pr = make_toy_quadratic(2, 2, C=np.eye(2))
    x = np.zeros(2)
    y = np.array([1.0, 2.0])
    state = AdaState(2.0)
    res = adaptive_lower_solve(pr, x, y, state, 1e-30, cap=1)
    assert state.value == pytest.approx(3.0)
    np.testing.assert_allclose(res.solution, y - y / 3.0)
    assert res.cap_hit and res.iterations == 1


def test_lower_solve_gaussian_mle_reaches_closed_form():
    pr, inst = make_robust("gaussian_mle", 10, 5, seed=0)
    p = pr.x0
    res = adaptive_lower_solve(pr, p, pr.y0, AdaState(1.0), 1e-8)
    assert res.final_residual_sq <= 1e-8
    assert pr.lower.dist(res.solution, pr.lower_closed_form(p)) <= 1e-3


def test_lower_solve_retract_mode():
    pr, inst = make_robust("gaussian_mle", 10, 5, seed=1)
    res = adaptive_lower_solve(pr, pr.x0, pr.y0, AdaState(1.0), 1e-8, map_mode="retract")
    assert pr.lower.dist(res.solution, pr.lower_closed_form(pr.x0)) <= 1e-3


def test_lower_solve_two_stage_behaviour():
    pr, _ = make_robust("gaussian_mle", 50, 10, seed=0)
    state = AdaState(0.01)
    res = adaptive_lower_solve(pr, pr.x0, pr.y0, state, 1e-6, cap=2000)
    assert res.final_residual_sq <= 1e-6
    h = np.array(res.residual_history)
    b = np.sqrt(0.01**2 + np.cumsum(h[:-1]))
    assert b[-1] > 100 * 0.01
    tail = h[-max(len(h) // 4, 2):]
    assert np.exp(np.mean(np.diff(np.log(tail)))) < 1.0


def test_lower_solve_nonfinite_gradient():
    pr = BilevelProblem(
        upper=Euclidean(1), lower=Euclidean(1), f=lambda x, y: 0.0, g=lambda x, y: 0.0,
        grad_f_x=lambda x, y: np.zeros(1), grad_f_y=lambda x, y: np.zeros(1),
        grad_g_y=lambda x, y: np.array([np.nan]),
    )
    with pytest.raises(DivergenceError):
        adaptive_lower_solve(pr, X0, np.zeros(1), AdaState(1.0), 1e-6)


# ---- adaptive GD on the linear system ----------------------------------

def test_gd_exact_start_takes_no_steps():
    pr = linear_system_problem(np.diag([1.0, 2, 4]), np.ones(3))
    res = adaptive_linear_solve_gd(pr, X0, np.zeros(3), np.array([1.0, 0.5, 0.25]), AdaState(1.0), 1e-10)
    assert res.iterations == 0


def _scalar_recursion(tol):
    c2, r, n = 1.0, 1.0, 0
    while r * r > tol:
        c2 += r * r
        r *= 1 - 1 / math.sqrt(c2)
        n += 1
    return n


def test_gd_identity_matches_scalar_recursion():
    pr = linear_system_problem(np.eye(2), np.array([1.0, 0.0]))
    res = adaptive_linear_solve_gd(pr, X0, np.zeros(2), np.zeros(2), AdaState(1.0), 1e-8)
    assert res.final_residual_sq <= 1e-8
    assert res.iterations == _scalar_recursion(1e-8)
    assert res.iterations <= 60


def test_gd_diagonal_system():
    pr = linear_system_problem(np.diag([1.0, 2, 4]), np.ones(3))
    res = adaptive_linear_solve_gd(pr, X0, np.zeros(3), np.zeros(3), AdaState(1.0), 1e-12)
    np.testing.assert_allclose(res.solution, [1.0, 0.5, 0.25], atol=1e-4)


def test_gd_nonfinite_residual():
    pr = linear_system_problem(np.array([[np.inf]]), np.ones(1))
    with pytest.raises(DivergenceError):
        adaptive_linear_solve_gd(pr, X0, np.zeros(1), np.ones(1), AdaState(1.0), 1e-8)


# ---- TSCG --------------------------------------------------------------

def test_cg_identity_one_iteration():
    b = np.array([3.0, -1.0, 2.0])
    res = tscg_solve(linear_system_problem(np.eye(3), b), X0, np.zeros(3), None, 1e-12)
    assert res.iterations == 1
    np.testing.assert_allclose(res.solution, b)


def test_cg_diagonal_three_eigenvalues():
    res = tscg_solve(linear_system_problem(np.diag([1.0, 2, 4]), np.ones(3)), X0, np.zeros(3), None, 1e-12)
    assert res.iterations <= 3
    assert math.sqrt(res.final_residual_sq) <= 1e-12
    np.testing.assert_allclose(res.solution, [1.0, 0.5, 0.25], atol=1e-12)


def test_cg_random_ten_dim_systems(rng):
    for _ in range(10):
        q, _ = np.linalg.qr(rng.standard_normal((10, 10)))
        H = (q * rng.uniform(0.5, 20, 10)) @ q.T
        b = rng.standard_normal(10)
        res = tscg_solve(linear_system_problem(H, b), X0, np.zeros(10), None, 1e-10)
        assert math.sqrt(res.final_residual_sq) <= 1e-10
        np.testing.assert_allclose(res.solution, np.linalg.solve(H, b), atol=1e-8)


def test_cg_on_spd_tangent_space(rng):
    m = SPD(3)
    y = m.random_point(rng)
    op, _ = random_spd_operator(rng, m, y)
    rhs = m.random_tangent(rng, y)
    pr = BilevelProblem(
        upper=Euclidean(1), lower=m, f=lambda x, z: 0.0, g=lambda x, z: 0.0,
        grad_f_x=lambda x, z: np.zeros(1), grad_f_y=lambda x, z: rhs, grad_g_y=lambda x, z: 0 * z,
        hess_g_y_vec=lambda x, z, v: op(v), cross_g_xy_vec=lambda x, z, v: np.zeros(1),
    )
    res = tscg_solve(pr, X0, y, None, 1e-10)
    assert res.iterations <= m.dim() + 2
    np.testing.assert_allclose(res.solution, dense_solve(m, y, op, rhs), atol=1e-8)


def test_cg_energy_monotone(rng):
    q, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    H = (q * np.geomspace(1, 100, 8)) @ q.T
    pr = linear_system_problem(H, rng.standard_normal(8))
    vals = [quad_value(pr, X0, np.zeros(8), tscg_solve(pr, X0, np.zeros(8), None, 1e-14, cap=k).solution)
            for k in range(9)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_cg_indefinite_operator():
    pr = linear_system_problem(np.diag([1.0, -1.0]), np.array([0.0, 1.0]))
    with pytest.raises(IndefiniteError):
        tscg_solve(pr, X0, np.zeros(2), None, 1e-10)


def test_cg_cap_flag():
    q = np.diag(np.geomspace(1, 1e3, 20))
    res = tscg_solve(linear_system_problem(q, np.ones(20)), X0, np.zeros(20), None, 1e-14, cap=3)
    assert res.cap_hit and res.iterations == 3


def test_gd_and_cg_agree_within_error_bound(rng):
    q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    eig = rng.uniform(0.5, 3, 5)
    H = (q * eig) @ q.T
    pr = linear_system_problem(H, rng.standard_normal(5))
    eps = 1e-8
    gd = adaptive_linear_solve_gd(pr, X0, np.zeros(5), np.zeros(5), AdaState(1.0), eps).solution
    cg = tscg_solve(pr, X0, np.zeros(5), None, math.sqrt(eps)).solution
    assert np.linalg.norm(gd - cg) <= 2 * math.sqrt(eps) / eig.min()
