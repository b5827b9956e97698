"""Problem generators, timing harness and CSV writers."""
from __future__ import annotations

import csv
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, KronLSError
from .kron import KronOperator
from .legendre import gauss_legendre_nodes, legendre_vandermonde
from .solvers import CgConfig, solve_cg, solve_direct_dense

TABLE_HEADER = [
    "case", "sizes", "method", "runtime_s", "iterations",
    "normal_residual", "true_residual", "flops", "converged",
]
COEFF_HEADER = ["index", "direct", "iterative", "abs_diff"]
COEFF_THRESHOLD = 1e-8
METHODS = ("direct", "cg")
PROBLEMS = ("random", "legendre")


def _check_sizes(sizes):
    sizes = tuple(int(m) for m in sizes)
    if not sizes or any(m < 1 for m in sizes):
        raise ValueError(f"sizes must be a nonempty list of positive integers, got {sizes}")
    return sizes


def gen_random(sizes, seed):
    """Diagonally dominant factors ``m*I + E`` (E uniform on (-1, 1)), a random
    ``x_star`` and ``b = K x_star``."""
    sizes = _check_sizes(sizes)
    rng = np.random.default_rng(seed)
    factors = [m * np.eye(m) + rng.uniform(-1.0, 1.0, (m, m)) for m in sizes]
    op = KronOperator(factors)
    x_star = rng.uniform(-1.0, 1.0, op.total_dim)
    return op, op.apply(x_star), x_star


def smooth_test_function(*coords):
    return np.exp(-sum(t * t for t in coords))


def gen_legendre(sizes, seed=None):
    """Tensor-grid Legendre interpolation of ``exp(-|t|^2)``.

    Factor k evaluates ``P_0 .. P_{m_k-1}`` at the m_k Gauss-Legendre nodes.
    ``seed`` is accepted for interface symmetry; the problem is deterministic.
    """
    sizes = _check_sizes(sizes)
    nodes = [gauss_legendre_nodes(m) for m in sizes]
    op = KronOperator([legendre_vandermonde(t, t.size) for t in nodes])
    grid = np.meshgrid(*nodes, indexing="ij")
    b = smooth_test_function(*grid).reshape(-1)
    return op, b


@dataclass
class BenchCase:
    sizes: tuple
    problem: str = "random"
    seed: int = 42
    methods: tuple = METHODS
    cg: CgConfig = field(default_factory=CgConfig)
    repeats: int = 3
    case_id: int = 1
    cap: int | None = None

    def __post_init__(self):
        self.sizes = _check_sizes(self.sizes)
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")


@dataclass
class BenchRecord:
    case: int
    sizes: tuple
    method: str
    runtime_s: float
    iterations: int
    normal_residual: float
    true_residual: float
    flops: int
    converged: bool
    error: str | None = None
    x: np.ndarray | None = field(default=None, repr=False)

    def row(self):
        return [
            str(self.case),
            "x".join(str(m) for m in self.sizes),
            self.method,
            _fmt(self.runtime_s),
            str(self.iterations),
            _fmt(self.normal_residual),
            _fmt(self.true_residual),
            str(self.flops),
            "true" if self.converged else "false",
        ]


def _fmt(v):
    return f"{v:.17g}"


def make_problem(case):
    if case.problem == "random":
        op, b, _ = gen_random(case.sizes, case.seed)
    else:
        op, b = gen_legendre(case.sizes, case.seed)
    return op, b


def run_bench(case):
    """Time each requested method ``case.repeats`` times on one instance and
    return one record per method holding the median wall time.

    A failing method produces a record with ``converged=False`` and an
    ``error`` tag; the remaining methods still run.
    """
    op, b = make_problem(case)
    records = []
    for method in case.methods:
        times = []
        report = None
        try:
            for _ in range(case.repeats):
                if method == "cg":
                    report = solve_cg(op, b, case.cg)
                else:
                    report = solve_direct_dense(op, b, cap=case.cap)
                times.append(report.wall_time_seconds)
        except (KronLSError, MemoryError) as exc:
            records.append(BenchRecord(
                case=case.case_id, sizes=case.sizes, method=method,
                runtime_s=math.nan, iterations=0, normal_residual=math.nan,
                true_residual=math.nan, flops=0, converged=False,
                error=f"{type(exc).__name__}: {exc}",
            ))
            continue
        records.append(BenchRecord(
            case=case.case_id,
            sizes=case.sizes,
            method=method,
            runtime_s=statistics.median(times),
            iterations=report.iterations,
            normal_residual=report.normal_residual,
            true_residual=report.true_residual,
            flops=report.flops,
            converged=report.converged,
            x=report.x,
        ))
    return records


def run_cases(cases, jobs=1):
    """Run cases sequentially, or in ``jobs`` worker processes (each case
    still timed inside a single process)."""
    if jobs <= 1:
        return [rec for case in cases for rec in run_bench(case)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return [rec for recs in pool.map(run_bench, cases) for rec in recs]


def emit_table(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TABLE_HEADER)
        for rec in records:
            writer.writerow(rec.row())


def read_table(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def coeff_max_diff(x_direct, x_cg, threshold=COEFF_THRESHOLD):
    """Largest ``|direct - iterative|`` over coefficients with ``|direct| > threshold``."""
    mask = np.abs(x_direct) > threshold
    if not np.any(mask):
        return 0.0
    return float(np.max(np.abs(x_direct[mask] - x_cg[mask])))


def emit_coeffs(x_direct, x_cg, path, threshold=COEFF_THRESHOLD, stream=None, quiet=False):
    """Write the per-coefficient comparison CSV and report the max difference
    over coefficients above ``threshold``. Returns that maximum."""
    x_direct = np.asarray(x_direct, dtype=np.float64).ravel()
    x_cg = np.asarray(x_cg, dtype=np.float64).ravel()
    if x_direct.shape != x_cg.shape:
        raise DimensionMismatch(f"coefficient vectors differ in length: {x_direct.size} vs {x_cg.size}")
    diff = np.abs(x_direct - x_cg)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COEFF_HEADER)
        for i, (d, c, e) in enumerate(zip(x_direct, x_cg, diff)):
            writer.writerow([i, _fmt(d), _fmt(c), _fmt(e)])
    worst = coeff_max_diff(x_direct, x_cg, threshold)
    if not quiet:
        print(f"max abs_diff over |direct| > {threshold:g}: {worst:.3e}", file=stream)
    return worst
