import dataclasses
import math

import numpy as np
import pytest

from adarhd import diagnostics as dg
from adarhd.benchmarks import make_simple_similarity, make_toy_quadratic
from adarhd.manifolds import SPD, Euclidean, Simplex, Sphere, Stiefel

from helpers import linear_system_problem


def test_report_pass_iff_below_threshold():
    assert dg.CheckReport("a", 1e-6, 3, 1e-5).passed
    assert not dg.CheckReport("a", 2e-5, 3, 1e-5).passed
    d = dg.CheckReport("a", 1e-5, 3, 1e-5).to_dict()
    assert d["pass"] is True and d["samples"] == 3
    assert "FAIL" in str(dg.CheckReport("a", math.inf, 1, 1e-5))


def test_constant_function(rng):
    m = SPD(3)
    x = m.random_point(rng)
    rep = dg.check_gradient(lambda z: 7.0, m.zero_tangent(x), m, x, rng=rng)
    assert rep.max_rel_error <= 1e-12 and rep.passed


def test_spd_squared_distance_gradient(rng):
    m = SPD(4)
    x, y0 = m.random_point(rng), m.random_point(rng)
    rep = dg.check_gradient(lambda z: 0.5 * m.dist(z, y0) ** 2, -m.log(x, y0), m, x, rng=rng)
    assert rep.max_rel_error <= 1e-6


@pytest.mark.parametrize("factor", [2.0, 1.01])
def test_corrupted_gradient_fails(rng, factor):
    m = SPD(4)
    x, y0 = m.random_point(rng), m.random_point(rng)
    rep = dg.check_gradient(lambda z: 0.5 * m.dist(z, y0) ** 2, -factor * m.log(x, y0), m, x, rng=rng)
    assert not rep.passed


def test_check_gradient_rejects_zero_directions(rng):
    with pytest.raises(ValueError):
        dg.check_gradient(lambda z: 0.0, np.zeros(2), Euclidean(2), np.zeros(2), n_dirs=0)


def test_adjoint_separable_and_toy(rng):
    pr = linear_system_problem(np.eye(2), np.ones(2))
    assert dg.check_adjoint(pr, np.zeros(1), np.ones(2), rng=rng).passed
    C = np.array([[1.0, 2.0], [-0.5, 3.0]])
    toy = make_toy_quadratic(2, 2, C=C)
    x, y = rng.standard_normal(2), rng.standard_normal(2)
    u, v = rng.standard_normal(2), rng.standard_normal(2)
    assert float(toy.cross(x, y, v) @ u) == pytest.approx(-u @ C.T @ v)
    assert float(v @ toy.cross_yx(x, y, u)) == pytest.approx(-u @ C.T @ v)
    assert dg.check_adjoint(toy, x, y, rng=rng).passed


def test_adjoint_similarity(rng):
    pr, _ = make_simple_similarity(30, 8, 3, 0.01, seed=0)
    x, y = pr.upper.random_point(rng), pr.lower.random_point(rng)
    assert dg.check_adjoint(pr, x, y, rng=rng).max_rel_error <= 1e-3


def test_problem_suite_passes_and_detects_corruption(rng):
    pr, _ = make_simple_similarity(30, 8, 3, 0.01, seed=0)
    reps = dg.check_problem(pr, n_points=3, rng=rng)
    names = {r.check_name for r in reps}
    assert {"grad_f_x", "grad_f_y", "grad_g_y", "hess_g_y_vec", "cross_g_xy_vec", "adjoint"} <= names
    assert all(r.passed for r in reps)
    bad = dataclasses.replace(pr, grad_g_y=lambda W, M: 1.01 * pr.grad_g_y(W, M))
    reps = {r.check_name: r for r in dg.check_problem(bad, n_points=2, rng=rng)}
    assert not reps["grad_g_y"].passed
    bad = dataclasses.replace(pr, hess_g_y_vec=lambda W, M, U: 1.01 * pr.hess_g_y_vec(W, M, U))
    reps = {r.check_name: r for r in dg.check_problem(bad, n_points=2, rng=rng)}
    assert not reps["hess_g_y_vec"].passed
    bad = dataclasses.replace(pr, cross_g_yx_vec=lambda W, M, U: 1.01 * pr.cross_g_yx_vec(W, M, U))
    reps = {r.check_name: r for r in dg.check_problem(bad, n_points=2, rng=rng)}
    assert not reps["adjoint"].passed


def test_zeta():
    assert dg.zeta(0.0, 3.0) == 1.0
    assert dg.zeta(-0.5, 0.0) == 1.0
    s = math.sqrt(0.5) * 2.0
    assert dg.zeta(-0.5, 2.0) == pytest.approx(s / math.tanh(s))


def test_euclidean_suite_is_exact(rng):
    reps = dg.check_manifold(Euclidean(50), rng=rng)
    assert all(r.max_rel_error <= 1e-14 for r in reps)


def test_spd_trig_bound(rng):
    rep = dg.check_trig_bound(SPD(3), -0.5, 100, diameter=2.0, rng=rng)
    assert rep.max_rel_error <= 1e-8 and rep.passed


def test_curvature_factor_is_needed_on_spd(rng):
    # with zeta = 1 (the flat law of cosines) the bound is violated on SPD
    m = SPD(3)
    worst = 0.0
    for _ in range(50):
        a = m.random_point(rng)
        u, w = m.random_tangent(rng, a, 1.5), m.random_tangent(rng, a, 1.5)
        lhs = m.dist(m.exp(a, u), m.exp(a, w)) ** 2
        flat = m.norm(a, w) ** 2 + m.norm(a, u) ** 2 - 2 * m.inner(a, u, w)
        worst = max(worst, lhs - flat)
    assert worst > 1e-3


@pytest.mark.parametrize("m", [Stiefel(10, 3), SPD(4), Simplex(6), Sphere(5)], ids=repr)
def test_manifold_suites_pass(m, rng):
    reps = dg.check_manifold(m, 10, rng=rng)
    assert all(r.passed for r in reps), [str(r) for r in reps]
    if isinstance(m, Stiefel):
        assert not any("isometry" in r.check_name for r in reps)
        assert any("retraction" in r.check_name for r in reps)
