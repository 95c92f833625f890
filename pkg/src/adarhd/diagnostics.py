"""Finite-difference checks for oracles and property suites for manifolds."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .manifolds import Manifold, add_tangent, flatten, scale_tangent
from .problem import BilevelProblem, fd_cross_g_xy_vec, fd_cross_g_yx_vec, fd_hess_g_y_vec

FIRST_ORDER_TOL = 1e-5
SECOND_ORDER_TOL = 1e-4
ADJOINT_TOL = 1e-3


@dataclass(frozen=True)
class CheckReport:
    check_name: str
    max_rel_error: float
    samples: int
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(self.max_rel_error <= self.threshold)

    def to_dict(self) -> dict:
        return {
            "check_name": self.check_name,
            "max_rel_error": self.max_rel_error,
            "samples": self.samples,
            "threshold": self.threshold,
            "pass": self.passed,
        }

    def __str__(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.check_name:<40s} {self.max_rel_error:10.3e} <= {self.threshold:.0e}  (n={self.samples})"


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _unit(manifold, rng, x):
    return manifold.random_tangent(rng, x, 1.0)


def _rel(a, b) -> float:
    diff = np.linalg.norm(flatten(a) - flatten(b))
    return float(diff / max(np.linalg.norm(flatten(b)), 1e-12))


# ---------------------------------------------------------------- first order

def check_gradient(
    fn: Callable,
    grad,
    manifold: Manifold,
    x,
    n_dirs: int = 10,
    h: float = 1e-6,
    threshold: float = FIRST_ORDER_TOL,
    rng=None,
    name: str = "gradient",
) -> CheckReport:
    """Compare ``<grad, u>`` with a central difference of ``fn`` along ``exp_x(t u)``.

    ``grad`` is the claimed Riemannian gradient at ``x`` (or a callable of
    ``x``).  Errors are measured relative to ``|grad|``, so a vanishing
    gradient of a constant function reports zero.
    """
    if n_dirs < 1:
        raise ValueError("n_dirs must be at least 1")
    rng = _rng(rng)
    if callable(grad):
        grad = grad(x)
    scale = max(manifold.norm(x, grad), 1e-12)
    worst = 0.0
    for _ in range(n_dirs):
        u = _unit(manifold, rng, x)
        fd = (fn(manifold.exp(x, scale_tangent(u, h))) - fn(manifold.exp(x, scale_tangent(u, -h)))) / (2 * h)
        worst = max(worst, abs(fd - manifold.inner(x, grad, u)) / scale)
    return CheckReport(name, worst, n_dirs, threshold)


def check_problem_gradients(problem: BilevelProblem, x, y, n_dirs: int = 10, h: float = 1e-6, rng=None) -> list:
    """FD checks of ``grad_f_x``, ``grad_f_y``, ``grad_g_y`` (and ``grad_g_x`` if given)."""
    rng = _rng(rng)
    N, M = problem.upper, problem.lower
    out = [
        check_gradient(lambda a: problem.f(a, y), problem.grad_f_x(x, y), N, x, n_dirs, h, rng=rng, name="grad_f_x"),
        check_gradient(lambda b: problem.f(x, b), problem.grad_f_y(x, y), M, y, n_dirs, h, rng=rng, name="grad_f_y"),
        check_gradient(lambda b: problem.g(x, b), problem.grad_g_y(x, y), M, y, n_dirs, h, rng=rng, name="grad_g_y"),
    ]
    if problem.grad_g_x is not None:
        out.append(check_gradient(lambda a: problem.g(a, y), problem.grad_g_x(x, y), N, x, n_dirs, h,
                                  rng=rng, name="grad_g_x"))
    return out


# --------------------------------------------------------------- second order

def check_second_order(problem: BilevelProblem, x, y, n_dirs: int = 10, h: float = 1e-5,
                       threshold: float = SECOND_ORDER_TOL, rng=None) -> list:
    """Analytic Hessian-vector and cross products against finite differences of gradients."""
    rng = _rng(rng)
    N, M = problem.upper, problem.lower
    pairs = []
    if problem.hess_g_y_vec is not None:
        pairs.append(("hess_g_y_vec", lambda: _unit(M, rng, y),
                      lambda v: problem.hess_g_y_vec(x, y, v), lambda v: fd_hess_g_y_vec(problem, x, y, v, h)))
    if problem.cross_g_xy_vec is not None and problem.grad_g_x is not None:
        pairs.append(("cross_g_xy_vec", lambda: _unit(M, rng, y),
                      lambda v: problem.cross_g_xy_vec(x, y, v), lambda v: fd_cross_g_xy_vec(problem, x, y, v, h)))
    if problem.cross_g_yx_vec is not None:
        pairs.append(("cross_g_yx_vec", lambda: _unit(N, rng, x),
                      lambda u: problem.cross_g_yx_vec(x, y, u), lambda u: fd_cross_g_yx_vec(problem, x, y, u, h)))
    out = []
    for name, draw, analytic, numeric in pairs:
        worst = 0.0
        for _ in range(n_dirs):
            d = draw()
            worst = max(worst, _rel(analytic(d), numeric(d)))
        out.append(CheckReport(name, worst, n_dirs, threshold))
    return out


def check_adjoint(problem: BilevelProblem, x, y, n_pairs: int = 10, h: float = 1e-4,
                  threshold: float = ADJOINT_TOL, rng=None) -> CheckReport:
    """``<cross_xy[v], u>_x = <v, cross_yx[u]>_y``, both checked against a double FD of ``g``.

    The mixed difference of ``g`` along ``exp_x(s u)`` and ``exp_y(t v)``
    estimates the same bilinear form.  Errors are relative to the largest of
    the three values, floored at ``1e-6 (1 + |g|)`` to absorb FD noise when
    the coupling vanishes.
    """
    rng = _rng(rng)
    N, M = problem.upper, problem.lower
    worst = 0.0
    floor = 1e-6 * (1.0 + abs(problem.g(x, y)))
    for _ in range(n_pairs):
        u = _unit(N, rng, x)
        v = _unit(M, rng, y)
        xp, xm = N.exp(x, scale_tangent(u, h)), N.exp(x, scale_tangent(u, -h))
        yp, ym = M.exp(y, scale_tangent(v, h)), M.exp(y, scale_tangent(v, -h))
        fd = (problem.g(xp, yp) - problem.g(xp, ym) - problem.g(xm, yp) + problem.g(xm, ym)) / (4 * h * h)
        lhs = N.inner(x, problem.cross(x, y, v), u)
        rhs = M.inner(y, v, problem.cross_yx(x, y, u))
        scale = max(abs(fd), abs(lhs), abs(rhs), floor)
        worst = max(worst, abs(lhs - fd) / scale, abs(rhs - fd) / scale, abs(lhs - rhs) / scale)
    return CheckReport("adjoint", worst, n_pairs, threshold)


def check_problem(problem: BilevelProblem, n_points: int = 10, rng=None, points=None) -> list:
    """Run the first-order, second-order and adjoint checks at ``n_points`` random points.

    Reports are merged per check (worst error, total samples).  ``points`` may
    supply explicit ``(x, y)`` pairs instead of random ones.
    """
    rng = _rng(rng)
    if points is None:
        points = [(problem.upper.random_point(rng), problem.lower.random_point(rng)) for _ in range(n_points)]
    merged = {}
    for x, y in points:
        reports = check_problem_gradients(problem, x, y, n_dirs=3, rng=rng)
        reports += check_second_order(problem, x, y, n_dirs=3, rng=rng)
        reports.append(check_adjoint(problem, x, y, n_pairs=3, rng=rng))
        for rep in reports:
            prev = merged.get(rep.check_name)
            if prev is None:
                merged[rep.check_name] = rep
            else:
                merged[rep.check_name] = CheckReport(
                    rep.check_name, max(prev.max_rel_error, rep.max_rel_error),
                    prev.samples + rep.samples, rep.threshold)
    return list(merged.values())


# ------------------------------------------------------------------ manifolds

def zeta(tau: float, c: float) -> float:
    """Curvature factor ``sqrt|tau| c / tanh(sqrt|tau| c)`` (1 for ``tau >= 0``)."""
    if tau >= 0:
        return 1.0
    s = math.sqrt(-tau) * c
    return 1.0 if s < 1e-12 else s / math.tanh(s)


def _step_scale(manifold, x, scale, frac=0.9):
    return min(scale, frac * manifold.max_step(x))


def check_roundtrip(manifold: Manifold, n_samples: int = 20, scale: float = 0.5, threshold: float = 1e-8,
                    rng=None) -> CheckReport:
    """``log_x(exp_x(u)) = u`` relative to ``|u|``, with ``|u|`` inside the injectivity radius."""
    rng = _rng(rng)
    worst = 0.0
    for _ in range(n_samples):
        x = manifold.random_point(rng)
        u = manifold.random_tangent(rng, x, _step_scale(manifold, x, scale))
        back = manifold.log(x, manifold.exp(x, u))
        worst = max(worst, manifold.norm(x, add_tangent(back, u, -1.0)) / manifold.norm(x, u))
    return CheckReport(f"{manifold!r} exp/log roundtrip", worst, n_samples, threshold)


def check_isometry(manifold: Manifold, n_samples: int = 20, threshold: float = 1e-10, rng=None) -> CheckReport:
    """Transport preserves inner products: ``|<Pu, Pv> - <u, v>| / (|u| |v|)``."""
    rng = _rng(rng)
    worst = 0.0
    for _ in range(n_samples):
        x = manifold.random_point(rng)
        z = manifold.exp(x, manifold.random_tangent(rng, x, _step_scale(manifold, x, 1.0)))
        u = manifold.random_tangent(rng, x)
        v = manifold.random_tangent(rng, x)
        pu, pv = manifold.transport(x, z, u), manifold.transport(x, z, v)
        err = abs(manifold.inner(z, pu, pv) - manifold.inner(x, u, v))
        worst = max(worst, err / (manifold.norm(x, u) * manifold.norm(x, v)))
    return CheckReport(f"{manifold!r} transport isometry", worst, n_samples, threshold)


def check_retraction(manifold: Manifold, n_samples: int = 20, scales=(1.0, 0.5, 0.25),
                     threshold: float = 0.5, rng=None) -> CheckReport:
    """The ratio ``|R_x(t u) - Exp_x(t u)| / (t^2 |u|^2)`` must not grow as ``t`` shrinks.

    The reported error is the worst relative growth of the ratio over the
    scales compared with ``t = scales[0]``; second-order retractions, whose
    ratio decays, report zero.  Errors are ambient Frobenius norms.
    """
    rng = _rng(rng)
    worst = 0.0
    for _ in range(n_samples):
        x = manifold.random_point(rng)
        # well inside the chart, so the ratio is in its asymptotic regime
        u = manifold.random_tangent(rng, x, _step_scale(manifold, x, 0.5, frac=0.25))
        nu2 = manifold.norm(x, u) ** 2
        ratios = []
        for t in scales:
            tu = scale_tangent(u, t)
            gap = np.linalg.norm(flatten(manifold.retract(x, tu)) - flatten(manifold.exp(x, tu)))
            ratios.append(gap / (t * t * nu2))
        base = ratios[0]
        if max(ratios) <= 1e-10:
            continue
        worst = max(worst, max(ratios[1:]) / max(base, 1e-300) - 1.0)
    return CheckReport(f"{manifold!r} retraction ratio growth", max(worst, 0.0), n_samples, threshold)


def check_trig_bound(manifold: Manifold, tau: float, n_samples: int = 100, diameter: float = 2.0,
                     threshold: float = 1e-8, rng=None) -> CheckReport:
    """Trigonometric distance bound on random geodesic triangles.

    For vertices ``a, b, c`` with ``u = log_a b`` and ``w = log_a c`` checks
    ``d(b, c)^2 <= zeta(tau, |u|) |w|^2 + |u|^2 - 2 <u, w>``.  The reported
    error is the largest violation (negative slack), zero if none.
    """
    rng = _rng(rng)
    worst = 0.0
    for _ in range(n_samples):
        a = manifold.random_point(rng)
        u = manifold.random_tangent(rng, a, rng.uniform(0, 0.5 * diameter))
        w = manifold.random_tangent(rng, a, rng.uniform(0, 0.5 * diameter))
        b, c = manifold.exp(a, u), manifold.exp(a, w)
        nu, nw = manifold.norm(a, u), manifold.norm(a, w)
        rhs = zeta(tau, nu) * nw ** 2 + nu ** 2 - 2 * manifold.inner(a, u, w)
        worst = max(worst, manifold.dist(b, c) ** 2 - rhs)
    return CheckReport(f"{manifold!r} trigonometric bound (tau={tau})", worst, n_samples, threshold)


def check_manifold(manifold: Manifold, n_samples: int = 20, rng=None) -> list:
    """Run the property suite that applies to ``manifold``.

    Roundtrip always; transport isometry when the geometry declares an
    isometric transport; retraction ratio when the retraction differs from
    exp; the trigonometric bound (100 triangles) on Hadamard geometries with
    a known curvature lower bound.
    """
    rng = _rng(rng)
    reports = [check_roundtrip(manifold, n_samples, rng=rng)]
    if getattr(manifold, "isometric_transport", False):
        reports.append(check_isometry(manifold, n_samples, rng=rng))
    if type(manifold)._retract is not Manifold._retract:
        reports.append(check_retraction(manifold, n_samples, rng=rng))
    tau: Optional[float] = getattr(manifold, "curvature_lower_bound", None)
    if tau is not None and getattr(manifold, "hadamard", False):
        reports.append(check_trig_bound(manifold, tau, 100, rng=rng))
    return reports
