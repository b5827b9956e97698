"""Kronecker-product least squares without forming the Kronecker product."""
from .dense import (
    MATERIALIZATION_CAP,
    QrFactors,
    kron_dense,
    lstsq_dense,
    materialization_monitor,
    qr_thin,
    solve_upper_triangular,
)
from .errors import (
    DimensionMismatch,
    KronLSError,
    MaxItersExceeded,
    NotPositiveDefinite,
    OverflowGuard,
    QuadratureFailure,
    RankDeficient,
    SingularTriangular,
)
from .kron import FlopCounter, KronOperator, MatShape, mat, vec
from .solvers import (
    CgConfig,
    SolveReport,
    residual_true,
    solve_cg,
    solve_direct_dense,
    solve_direct_qr2,
)

__version__ = "0.1.0"
