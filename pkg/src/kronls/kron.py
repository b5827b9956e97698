"""Matrix-free Kronecker operator ``K = A_1 kron ... kron A_n``.

Vectors are linearized with the last factor's index fastest,
``i = i_1*(m_2...m_n) + ... + i_n``, which matches the block layout of
:func:`kronls.dense.kron_dense`. At n = 2 this is the column-stacking
``vec`` of an ``m_2 x m_1`` matrix, so ``K x = vec(A_2 mat(x) A_1^T)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dense import as_matrix, as_vector, kron_dense
from .errors import DimensionMismatch


@dataclass(frozen=True)
class MatShape:
    inner_rows: int
    outer_cols: int


def mat(v, shape):
    """Reshape ``v`` into a matrix whose columns are consecutive slices of ``v``."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size != shape.inner_rows * shape.outer_cols:
        raise DimensionMismatch(
            f"cannot view vector of shape {v.shape} as {shape.inner_rows}x{shape.outer_cols}"
        )
    return v.reshape(shape.outer_cols, shape.inner_rows).T.copy()


def vec(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionMismatch("vec expects a 2-D array")
    return a.T.reshape(-1).copy()


class FlopCounter:
    """Per-solve multiply-add accumulator. Not shared between solves."""

    def __init__(self):
        self.count = 0
        self.applies = 0

    def add(self, n):
        self.count += n


class KronOperator:
    """Ordered square factors applied through n staged mode products.

    Stage k multiplies the current vector, viewed as ``left`` row-major
    ``m_k x right`` blocks, by ``A_k``; the identity padding on either side of
    ``A_k`` only shows up as the loop bounds ``left`` and ``right``.
    """

    def __init__(self, factors):
        if len(factors) < 1:
            raise ValueError("KronOperator needs at least one factor")
        mats = []
        for k, a in enumerate(factors):
            a = as_matrix(a, f"factor {k}").copy()
            if a.shape[0] != a.shape[1]:
                raise DimensionMismatch(f"factor {k} is not square: {a.shape}")
            a.setflags(write=False)
            mats.append(a)
        self._factors = tuple(mats)
        self.sizes = tuple(a.shape[0] for a in mats)
        self.total_dim = math.prod(self.sizes)
        self._flops_per_apply = self.total_dim * sum(self.sizes)

    @property
    def factors(self):
        return self._factors

    @property
    def n(self):
        return len(self._factors)

    @property
    def flops_per_apply(self):
        """Multiply-add pairs of one staged apply: prod(m_k) * sum(m_k)."""
        return self._flops_per_apply

    def __repr__(self):
        return f"KronOperator(sizes={self.sizes})"

    def _staged(self, factors, x, counter, reverse):
        x = as_vector(x, "x")
        if x.size != self.total_dim:
            raise DimensionMismatch(
                f"vector length {x.size} does not match operator dimension {self.total_dim}"
            )
        cur = x.copy()
        buf = np.empty_like(cur)
        order = range(self.n - 1, -1, -1) if reverse else range(self.n)
        for k in order:
            m = self.sizes[k]
            left = math.prod(self.sizes[:k])
            right = self.total_dim // (left * m)
            np.matmul(factors[k], cur.reshape(left, m, right), out=buf.reshape(left, m, right))
            cur, buf = buf, cur
            if counter is not None:
                counter.add(left * right * m * m)
        if counter is not None:
            counter.applies += 1
        return cur

    def apply(self, x, counter=None, reverse=False):
        """Return ``K x``. ``reverse`` runs the stages from the last factor
        to the first; the result is the same since the stages commute."""
        return self._staged(self._factors, x, counter, reverse)

    def apply_transpose(self, y, counter=None, reverse=False):
        """Return ``K^T y``, i.e. the staged product with every factor transposed."""
        return self._staged(tuple(a.T for a in self._factors), y, counter, reverse)

    def transpose(self):
        return KronOperator([a.T for a in self._factors])

    def gram(self):
        """Operator with factors ``A_k^T A_k``, equal to ``K^T K``."""
        return KronOperator([a.T @ a for a in self._factors])

    def to_dense(self, cap=None):
        """Fold kron_dense over the factors. Oracle/baseline use only."""
        out = self._factors[0]
        for a in self._factors[1:]:
            out = kron_dense(out, a, cap=cap)
        if self.n == 1:
            # still a materialization, report it like the multi-factor case
            out = kron_dense(np.ones((1, 1)), out, cap=cap)
        return out


def flops_per_apply(op):
    return op.flops_per_apply
