"""Dense kernels: Householder QR, triangular solves, least squares and the
explicit Kronecker product.

Matrices are row-major float64 numpy arrays. ``kron_dense`` is only meant as a
reference oracle and as the baseline solver; every call is reported to the
active :func:`materialization_monitor` contexts.
"""
from __future__ import annotations

import contextlib
import threading
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    OverflowGuard,
    RankDeficient,
    SingularTriangular,
)

#: Default upper bound on the number of entries kron_dense may produce.
MATERIALIZATION_CAP = 2**26

RANK_TOL = 1e-12
_BLOCK = 64
_CHUNK = 2048

_monitor_lock = threading.Lock()
_active_monitors: list["MaterializationMonitor"] = []


def as_matrix(a, name="matrix"):
    """Validate ``a`` as a finite 2-D float64 array (row-major copy if needed)."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def as_vector(v, name="vector"):
    arr = np.ascontiguousarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise DimensionMismatch(f"{name} must be a non-empty 1-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def matmul(a, b):
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def matvec(a, x):
    if x.ndim != 1 or a.shape[1] != x.shape[0]:
        raise DimensionMismatch(f"cannot apply {a.shape} matrix to vector of shape {x.shape}")
    return a @ x


def transpose(a):
    return np.ascontiguousarray(a.T)


def norm2(x):
    return float(np.sqrt(np.dot(x, x)))


def frobenius(a):
    return float(np.sqrt(np.sum(a * a)))


@dataclass(frozen=True)
class QrFactors:
    q: np.ndarray
    r: np.ndarray


class MaterializationMonitor:
    """Counts kron_dense calls and the entries they produced."""

    def __init__(self):
        self.calls = 0
        self.entries = 0

    @property
    def materialized(self):
        return self.calls > 0

    def _record(self, entries):
        self.calls += 1
        self.entries += entries


@contextlib.contextmanager
def materialization_monitor():
    """Context manager yielding a monitor that sees every kron_dense call
    made while it is active (from any thread)."""
    mon = MaterializationMonitor()
    with _monitor_lock:
        _active_monitors.append(mon)
    try:
        yield mon
    finally:
        with _monitor_lock:
            _active_monitors.remove(mon)


def kron_dense(a, b, cap=None):
    """Explicit Kronecker product: block (i, j) of the result is ``a[i, j] * b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionMismatch("kron_dense expects 2-D operands")
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    cap = MATERIALIZATION_CAP if cap is None else cap
    if rows * cols > cap:
        raise OverflowGuard(
            f"kron_dense result {rows}x{cols} has {rows * cols} entries, cap is {cap}"
        )
    with _monitor_lock:
        for mon in _active_monitors:
            mon._record(rows * cols)
    out = np.empty((a.shape[0], b.shape[0], a.shape[1], b.shape[1]))
    np.multiply(a[:, None, :, None], b[None, :, None, :], out=out)
    return out.reshape(rows, cols)


def _householder(a, rhs=None, keep_reflectors=True):
    """Blocked Householder triangularization of square ``a`` in place.

    Reflectors of each panel are aggregated in compact WY form
    ``H_1 ... H_k = I - V T V^T`` and applied to the trailing columns (and to
    ``rhs`` when given) with matrix-matrix products. Returns the list of
    ``(j0, V, T)`` panels if ``keep_reflectors``.
    """
    n = a.shape[0]
    panels = []
    for j0 in range(0, n, _BLOCK):
        j1 = min(j0 + _BLOCK, n)
        nb = j1 - j0
        p = a[j0:, j0:j1]
        m = p.shape[0]
        v_blk = np.zeros((m, nb))
        taus = np.zeros(nb)
        for c in range(nb):
            x = p[c:, c]
            normx = np.sqrt(np.dot(x, x))
            if normx == 0.0:
                continue
            alpha = -normx if x[0] >= 0 else normx
            v = x.copy()
            v[0] -= alpha
            v /= np.sqrt(np.dot(v, v))
            if c + 1 < nb:
                rest = p[c:, c + 1:]
                rest -= 2.0 * np.outer(v, v @ rest)
            p[c, c] = alpha
            p[c + 1:, c] = 0.0
            v_blk[c:, c] = v
            taus[c] = 2.0
        t = np.zeros((nb, nb))
        for c in range(nb):
            t[c, c] = taus[c]
            if c:
                t[:c, c] = -taus[c] * (t[:c, :c] @ (v_blk[:, :c].T @ v_blk[:, c]))
        # column chunks bound the temporary to m x _CHUNK
        for c0 in range(j1, n, _CHUNK):
            trail = a[j0:, c0:c0 + _CHUNK]
            trail -= v_blk @ (t.T @ (v_blk.T @ trail))
        if rhs is not None:
            seg = rhs[j0:]
            seg -= v_blk @ (t.T @ (v_blk.T @ seg))
        if keep_reflectors:
            panels.append((j0, v_blk, t))
    return panels


def _max_abs(a):
    # no |a| temporary: a may be the full materialized operator
    return float(max(a.max(), -a.min()))


def _check_rank(r_diag, scale):
    small = np.abs(r_diag) < RANK_TOL * scale
    if scale == 0.0 or np.any(small):
        idx = int(np.argmax(small)) if scale else 0
        raise RankDeficient(
            f"|r[{idx},{idx}]| below {RANK_TOL:g} * max|a|; matrix is numerically rank deficient"
        )


def qr_thin(a):
    """Thin QR of a square full-rank matrix with nonnegative diag(R)."""
    a = as_matrix(a)
    n, ncols = a.shape
    if n != ncols:
        raise DimensionMismatch(f"qr_thin expects a square matrix, got {a.shape}")
    scale = _max_abs(a)
    work = a.copy()
    panels = _householder(work)
    r = np.triu(work)
    _check_rank(np.diag(r), scale)

    q = np.eye(n)
    for j0, v_blk, t in reversed(panels):
        blk = q[j0:, j0:]
        blk -= v_blk @ (t @ (v_blk.T @ blk))

    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    r *= signs[:, None]
    q *= signs[None, :]
    return QrFactors(q=q, r=r)


def solve_upper_triangular(r, y):
    """Back substitution for ``r x = y``; ``y`` may be a vector or a matrix
    of right-hand sides (one per column)."""
    r = np.asarray(r, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = r.shape[0]
    if r.ndim != 2 or r.shape[1] != n or y.shape[0] != n:
        raise DimensionMismatch(f"cannot solve {r.shape} system with rhs {y.shape}")
    diag = np.diag(r)
    if np.any(diag == 0.0):
        raise SingularTriangular(f"zero on the diagonal at index {int(np.argmin(np.abs(diag)))}")
    x = np.array(y, dtype=np.float64, copy=True)
    for i in range(n - 1, -1, -1):
        if i + 1 < n:
            x[i] -= r[i, i + 1:] @ x[i + 1:]
        x[i] /= diag[i]
    return x


def lstsq_dense(a, b, overwrite_a=False):
    """Least-squares solution of ``a x = b`` through Householder QR:
    ``x = R^{-1} Q^T b``.

    ``Q^T b`` is accumulated while factoring so Q is never formed; with
    ``overwrite_a`` the factorization happens in the caller's buffer.
    """
    a = np.asarray(a, dtype=np.float64)
    b = as_vector(b, "b")
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"lstsq_dense expects a square matrix, got {a.shape}")
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"rhs length {b.shape[0]} does not match {a.shape}")
    scale = _max_abs(a)
    work = a if overwrite_a and a.flags.writeable and a.flags.c_contiguous else a.copy()
    qtb = b.copy()
    _householder(work, rhs=qtb, keep_reflectors=False)
    _check_rank(np.diag(work), scale)
    # sign flips on R and Q cancel in R^{-1} Q^T b
    return solve_upper_triangular(work, qtb)


def save_matrix_csv(path, a):
    """Write ``a`` one row per line, comma separated, 17 significant digits."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    np.savetxt(path, a, delimiter=",", fmt="%.17g")


def load_matrix_csv(path):
    return as_matrix(np.loadtxt(path, delimiter=",", ndmin=2), str(path))


def load_vector_csv(path):
    """Read a vector stored either one value per line or as a single row."""
    return as_vector(np.loadtxt(path, delimiter=",", ndmin=1).ravel(), str(path))
