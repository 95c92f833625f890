"""Small hand-built problems shared by the unit tests."""
import numpy as np

from adarhd.manifolds import SPD, Euclidean
from adarhd.problem import BilevelProblem


def linear_system_problem(H, b, analytic=True):
    """Euclidean ``g = 1/2 y^T H y`` (independent of x) and ``f = b^T y``.

    The quadratic subproblem is then ``H v = b``.
    """
    H = np.asarray(H, float)
    b = np.asarray(b, float)
    n = len(b)
    return BilevelProblem(
        upper=Euclidean(1),
        lower=Euclidean(n),
        f=lambda x, y: float(b @ y),
        g=lambda x, y: 0.5 * float(y @ H @ y),
        grad_f_x=lambda x, y: np.zeros(1),
        grad_f_y=lambda x, y: b.copy(),
        grad_g_y=lambda x, y: H @ y,
        hess_g_y_vec=(lambda x, y, v: H @ v) if analytic else None,
        cross_g_xy_vec=(lambda x, y, v: np.zeros(1)) if analytic else None,
        grad_g_x=lambda x, y: np.zeros(1),
        x0=np.zeros(1),
        y0=np.ones(n),
    )


def karcher_single(d=3):
    """``g(x, y) = d(y, I)^2`` on SPD(d); its Hessian at ``y = I`` is twice the identity."""
    m = SPD(d)
    eye = np.eye(d)
    return BilevelProblem(
        upper=Euclidean(1),
        lower=m,
        f=lambda x, y: 0.0,
        g=lambda x, y: m.dist(y, eye) ** 2,
        grad_f_x=lambda x, y: np.zeros(1),
        grad_f_y=lambda x, y: np.zeros((d, d)),
        grad_g_y=lambda x, y: -2.0 * m.log(y, eye),
        grad_g_x=lambda x, y: np.zeros(1),
    )


def random_spd_operator(rng, m, y, cond=50.0):
    """Self-adjoint positive definite operator on ``T_y`` of an SPD manifold.

    Built in whitened coordinates ``y^-1/2 U y^-1/2`` where the metric is the
    Frobenius one, so symmetry of the coefficient matrix gives self-adjointness.
    """
    basis = m.tangent_basis(np.eye(m.d))
    k = len(basis)
    q, _ = np.linalg.qr(rng.standard_normal((k, k)))
    K = (q * np.exp(rng.uniform(0, np.log(cond), k))) @ q.T
    w, v = np.linalg.eigh(y)
    s = (v * np.sqrt(w)) @ v.T
    si = (v / np.sqrt(w)) @ v.T
    B = np.stack([e.ravel() for e in basis], axis=1)  # orthonormal for Frobenius

    def apply(u):
        z = si @ u @ si
        c = B.T @ z.ravel()
        out = (B @ (K @ c)).reshape(m.d, m.d)
        return s @ (0.5 * (out + out.T)) @ s

    return apply, K
