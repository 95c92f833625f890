import numpy as np
import pytest

from adarhd.adarhd import AdaRHDConfig, run_adarhd
from adarhd.baselines import RHGDConfig, run_rhgd
from adarhd.benchmarks import make_toy_quadratic
from adarhd.errors import ConfigError, DivergenceError
from adarhd.trace import ergodic_min_gradnorm

GRID = (5.0, 1.0, 0.5, 0.1, 0.05)
SEEDS = (0.2, 1.0, 2.0, 10.0, 20.0)


def _toy(scale=1.0):
    return make_toy_quadratic(2, 2, C=scale * np.diag([1.0, 2.0]))


@pytest.mark.parametrize("kw", [dict(T=0), dict(eta_x=0), dict(eta_y=-1), dict(inner_iters=-1),
                                dict(cg_tol=0), dict(map_mode="cayley")])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        RHGDConfig(**kw)


def test_zero_inner_iterations_freezes_y():
    pr = _toy()
    y0 = np.array([0.3, -0.2])
    tr = run_rhgd(pr, RHGDConfig(T=5, inner_iters=0, eta_x=0.1), y0=y0)
    np.testing.assert_array_equal(tr.y, y0)
    # with y frozen, v solves v = y0 and the estimate is C^T y0 every iteration
    C = pr.meta["instance"].C
    g = C.T @ y0
    np.testing.assert_allclose(tr.column("hypergrad_sq"), float(g @ g), rtol=1e-12)
    assert np.all(tr.column("K_t") == 0)


def test_trace_schema_and_constant_a():
    tr = run_rhgd(_toy(), RHGDConfig(T=7, eta_x=0.25, inner_iters=20))
    assert len(tr) == 7 and tr.algorithm == "RHGD-20"
    assert np.all(tr.column("a") == 4.0)
    assert set(tr.column("status")) <= {"ok", "cap"}


def test_large_step_diverges():
    # the Hessian of F is C^T C with largest eigenvalue 4 > 2 / 5
    with pytest.raises(DivergenceError) as info:
        run_rhgd(_toy(), RHGDConfig(T=50, eta_x=5, eta_y=5))
    tr = info.value.trace
    assert tr.status == "diverged"
    assert len(tr) <= 50


def test_small_step_converges_on_toy():
    tr = run_rhgd(_toy(), RHGDConfig(T=2000, eta_x=0.2, eta_y=0.5, inner_iters=20, map_mode="exp"))
    e = ergodic_min_gradnorm(tr)
    assert np.all(np.diff(e) <= 0)
    assert e[-1] <= 1e-4


def test_step_size_grids_on_scaled_toy():
    # scaled so the smoothness constant of F is 16 > 4
    pr = _toy(2.0)
    statuses = []
    for eta in GRID:
        try:
            run_rhgd(pr, RHGDConfig(T=100, eta_x=eta, eta_y=min(eta, 0.2), inner_iters=20))
            statuses.append("ok")
        except DivergenceError:
            statuses.append("diverged")
    assert "diverged" in statuses
    for s in SEEDS:
        tr = run_adarhd(pr, AdaRHDConfig(T=300, a0=s, b0=s, c0=s, inner_cap_schedule=None))
        assert ergodic_min_gradnorm(tr)[-1] <= 1e-2
