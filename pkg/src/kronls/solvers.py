"""Least-squares solvers for ``min ||(A_1 kron ... kron A_n) x - b||``.

* :func:`solve_direct_qr2` -- closed form for two factors from their thin QR.
* :func:`solve_direct_dense` -- materialize K and run dense Householder least squares.
* :func:`solve_cg` -- conjugate gradient on the normal equations, matrix-free.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .dense import as_matrix, as_vector, lstsq_dense, norm2, qr_thin, solve_upper_triangular
from .errors import DimensionMismatch, MaxItersExceeded, NotPositiveDefinite
from .kron import FlopCounter, KronOperator, MatShape, mat, vec

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8


@dataclass
class CgConfig:
    tol: float = DEFAULT_TOL
    max_iters: int | None = None  # None -> 10 * N
    record_history: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass
class SolveReport:
    x: np.ndarray
    iterations: int
    normal_residual: float
    true_residual: float
    wall_time_seconds: float
    flops: int
    converged: bool
    history: list = field(default_factory=list, repr=False)
    iterates: list = field(default_factory=list, repr=False)


def _rel(num, den):
    if den == 0.0:
        return num
    return num / den


def residual_true(op, x, b):
    """``||K x - b|| / ||b||``; for ``b = 0`` the absolute norm ``||K x||``."""
    b = as_vector(b, "b")
    if b.size != op.total_dim:
        raise DimensionMismatch(f"rhs length {b.size} does not match operator dimension {op.total_dim}")
    return _rel(norm2(op.apply(x) - b), norm2(b))


def normal_residual(op, x, b, gram=None):
    gram = op.gram() if gram is None else gram
    rhs = op.apply_transpose(b)
    return _rel(norm2(gram.apply(x) - rhs), norm2(rhs))


def _finish(op, x, b, iterations, elapsed, flops, converged, gram=None, **extra):
    return SolveReport(
        x=x,
        iterations=iterations,
        normal_residual=normal_residual(op, x, b, gram),
        true_residual=residual_true(op, x, b),
        wall_time_seconds=max(elapsed, 0.0),
        flops=int(flops),
        converged=converged,
        **extra,
    )


def solve_direct_qr2(a1, a2, b):
    """Closed-form solve for ``(a1 kron a2) x = b``.

    With thin QR factors ``a_k = Q_k R_k``, ``mat(x) = R_2^{-1} Q_2^T mat(b) Q_1 R_1^{-T}``;
    both triangular factors are applied by back substitution, never inverted.
    """
    a1 = as_matrix(a1, "a1")
    a2 = as_matrix(a2, "a2")
    b = as_vector(b, "b")
    n, m = a1.shape[0], a2.shape[0]
    if a1.shape[1] != n or a2.shape[1] != m:
        raise DimensionMismatch("solve_direct_qr2 expects square factors")
    if b.size != m * n:
        raise DimensionMismatch(f"rhs length {b.size} does not match {m}*{n}")

    t0 = time.perf_counter()
    f1 = qr_thin(a1)
    f2 = qr_thin(a2)
    c = f2.q.T @ mat(b, MatShape(m, n)) @ f1.q
    y = solve_upper_triangular(f2.r, c)
    # X R_1^T = Y  <=>  R_1 X^T = Y^T
    x = vec(solve_upper_triangular(f1.r, y.T).T)
    elapsed = time.perf_counter() - t0

    # nominal multiply-adds: two QRs with explicit Q, two products, two triangular sweeps
    flops = (4 * (n**3 + m**3)) // 3 + m * m * n + m * n * n + (m * m * n + n * n * m) // 2
    op = KronOperator([a1, a2])
    return _finish(op, x, b, 0, elapsed, flops, True)


def solve_direct_dense(op, b, cap=None):
    """Materialize K with kron_dense and solve by Householder least squares."""
    b = as_vector(b, "b")
    if b.size != op.total_dim:
        raise DimensionMismatch(f"rhs length {b.size} does not match operator dimension {op.total_dim}")
    t0 = time.perf_counter()
    k = op.to_dense(cap=cap)
    x = lstsq_dense(k, b, overwrite_a=True)
    elapsed = time.perf_counter() - t0
    del k
    big_n = op.total_dim
    # nominal multiply-adds: assembly, Householder QR, Q^T b, back substitution
    flops = big_n**2 + (2 * big_n**3) // 3 + big_n**2 + big_n**2 // 2
    return _finish(op, x, b, 0, elapsed, flops, True)


def solve_cg(op, b, cfg=None, raise_on_fail=False):
    """Conjugate gradient on ``(kron A_k^T A_k) x = (kron A_k^T) b`` from ``x0 = 0``.

    Each iteration costs one staged apply of the Gram operator. When the
    recursive residual reaches ``cfg.tol`` it is recomputed explicitly; if
    drift left the true residual above tolerance the iteration restarts from
    the current iterate. On ``max_iters`` the best iterate is returned with
    ``converged=False`` (or :class:`MaxItersExceeded` is raised if
    ``raise_on_fail``).
    """
    cfg = CgConfig() if cfg is None else cfg
    b = as_vector(b, "b")
    if b.size != op.total_dim:
        raise DimensionMismatch(f"rhs length {b.size} does not match operator dimension {op.total_dim}")
    max_iters = 10 * op.total_dim if cfg.max_iters is None else cfg.max_iters
    counter = FlopCounter()
    history, iterates = [], []

    t0 = time.perf_counter()
    gram = op.gram()
    counter.add(sum(m**3 for m in op.sizes))
    rhs = op.apply_transpose(b, counter)
    rhs_norm = norm2(rhs)
    x = np.zeros(op.total_dim)
    if cfg.record_history:
        iterates.append(x.copy())
    converged = rhs_norm == 0.0
    it = 0
    if not converged:
        r = rhs.copy()
        p = r.copy()
        rr = float(r @ r)
        stop = cfg.tol * rhs_norm
        best_x, best_res = x.copy(), np.sqrt(rr)
        while it < max_iters:
            it += 1
            gp = gram.apply(p, counter)
            pgp = float(p @ gp)
            if pgp <= 0.0:
                raise NotPositiveDefinite(
                    f"p'Gp = {pgp:.3e} at iteration {it}; a factor is numerically rank deficient"
                )
            alpha = rr / pgp
            x += alpha * p
            r -= alpha * gp
            rr_new = float(r @ r)
            res = np.sqrt(rr_new)
            if cfg.record_history:
                history.append(res / rhs_norm)
                iterates.append(x.copy())
            if res <= stop:
                r = rhs - gram.apply(x, counter)
                rr_new = float(r @ r)
                res = np.sqrt(rr_new)
                if res <= stop:
                    converged = True
                    break
                log.debug("cg: residual drift at iteration %d, restarting", it)
                p = r.copy()
                rr = rr_new
                continue
            if res < best_res:
                best_x, best_res = x.copy(), res
            p *= rr_new / rr
            p += r
            rr = rr_new
        if not converged and best_res < res:
            x = best_x
    elapsed = time.perf_counter() - t0

    report = _finish(
        op, x, b, it, elapsed, counter.count, converged, gram=gram,
        history=history, iterates=iterates,
    )
    if not converged:
        msg = f"cg did not reach tol {cfg.tol:g} in {max_iters} iterations"
        if raise_on_fail:
            raise MaxItersExceeded(msg, report)
        log.warning(msg)
    return report
