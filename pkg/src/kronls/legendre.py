"""Gauss-Legendre nodes by Newton iteration and Legendre Vandermonde matrices."""
import numpy as np

from .errors import QuadratureFailure

NEWTON_TOL = 1e-14
NEWTON_MAX_STEPS = 100


def legendre_eval(t, degree):
    """Return ``(P_degree(t), P_degree-1(t))`` via the three-term recurrence."""
    t = np.asarray(t, dtype=np.float64)
    p_prev = np.zeros_like(t)
    p = np.ones_like(t)
    for k in range(1, degree + 1):
        p_prev, p = p, ((2 * k - 1) * t * p - (k - 1) * p_prev) / k
    return p, p_prev


def gauss_legendre_nodes(m):
    """Nodes of the m-point Gauss-Legendre rule on [-1, 1], ascending."""
    if m < 1:
        raise ValueError("m must be >= 1")
    i = np.arange(m)
    t = np.cos(np.pi * (i + 0.75) / (m + 0.5))
    for _ in range(NEWTON_MAX_STEPS):
        p, p_prev = legendre_eval(t, m)
        dp = m * (t * p - p_prev) / (t * t - 1.0)
        step = p / dp
        t = t - step
        if np.max(np.abs(step)) <= NEWTON_TOL:
            break
    else:
        raise QuadratureFailure(
            f"Newton iteration for {m}-point rule did not reach {NEWTON_TOL:g} in {NEWTON_MAX_STEPS} steps"
        )
    return np.sort(t)


def legendre_vandermonde(t, ncols):
    """Matrix with entry ``[i, j] = P_j(t_i)`` for ``j < ncols``."""
    t = np.asarray(t, dtype=np.float64)
    v = np.empty((t.size, ncols))
    v[:, 0] = 1.0
    if ncols > 1:
        v[:, 1] = t
    for k in range(2, ncols):
        v[:, k] = ((2 * k - 1) * t * v[:, k - 1] - (k - 1) * v[:, k - 2]) / k
    return v
