import csv
import io

import numpy as np
import pytest

from kronls.bench import (
    COEFF_HEADER,
    TABLE_HEADER,
    BenchCase,
    BenchRecord,
    coeff_max_diff,
    emit_coeffs,
    emit_table,
    gen_legendre,
    gen_random,
    read_table,
    run_bench,
    run_cases,
    smooth_test_function,
)
from kronls.dense import materialization_monitor
from kronls.errors import DimensionMismatch
from kronls.solvers import CgConfig, residual_true, solve_cg


# --- generators -------------------------------------------------------------

def test_gen_random_scalar_case():
    op, b, x_star = gen_random([1], 3)
    a = op.factors[0][0, 0]
    assert 0.0 < a < 2.0
    np.testing.assert_array_equal(b, a * x_star)


def test_gen_random_is_consistent():
    op, b, x_star = gen_random([2, 3, 4, 5], 42)
    assert residual_true(op, x_star, b) <= 1e-12


def test_gen_random_deterministic():
    op1, b1, x1 = gen_random([2, 3, 4], 42)
    op2, b2, x2 = gen_random([2, 3, 4], 42)
    for f1, f2 in zip(op1.factors, op2.factors):
        assert f1.tobytes() == f2.tobytes()
    assert b1.tobytes() == b2.tobytes() and x1.tobytes() == x2.tobytes()


def test_gen_random_diagonally_dominant():
    op, _, _ = gen_random([3, 6, 9], 0)
    for a in op.factors:
        off = np.sum(np.abs(a), axis=1) - np.abs(np.diag(a))
        assert np.all(np.abs(np.diag(a)) > off)


def test_gen_random_rejects_bad_sizes():
    with pytest.raises(ValueError):
        gen_random([], 0)
    with pytest.raises(ValueError):
        gen_random([2, 0], 0)


def test_gen_legendre_single_node():
    op, b = gen_legendre([1, 1, 1])
    for a in op.factors:
        np.testing.assert_array_equal(a, [[1.0]])
    np.testing.assert_array_equal(b, [1.0])


def test_gen_legendre_two_points():
    op, b = gen_legendre([2])
    r = 1 / np.sqrt(3)
    np.testing.assert_array_equal(op.factors[0][:, 0], [1.0, 1.0])
    np.testing.assert_allclose(op.factors[0][:, 1], [-r, r], atol=1e-14)
    np.testing.assert_allclose(b, np.exp(-np.array([r, r]) ** 2), rtol=1e-14)


def test_gen_legendre_grid_order_last_fastest():
    op, b = gen_legendre([2, 3])
    t1 = op.factors[0][:, 1]
    t2 = op.factors[1][:, 1]
    expected = [smooth_test_function(u, v) for u in t1 for v in t2]
    np.testing.assert_allclose(b, expected, rtol=1e-15)


def test_gen_legendre_interpolation_solve():
    op, b = gen_legendre([4, 5, 3])
    rep = solve_cg(op, b, CgConfig(tol=1e-8))
    assert rep.converged and rep.true_residual <= 1e-8


# --- run_bench ----------------------------------------------------------------

def test_run_bench_both_methods_agree():
    recs = run_bench(BenchCase(sizes=(2, 3, 4, 5), repeats=1))
    assert [r.method for r in recs] == ["direct", "cg"]
    for r in recs:
        assert r.converged and r.true_residual <= 1e-6
    assert np.max(np.abs(recs[0].x - recs[1].x)) <= 1e-6


def test_run_bench_cg_only_never_materializes():
    with materialization_monitor() as mon:
        (rec,) = run_bench(BenchCase(sizes=(10, 11, 12, 13), methods=("cg",), repeats=1))
    assert rec.converged
    assert not mon.materialized


def test_repeats_do_not_change_solution():
    one = run_bench(BenchCase(sizes=(3, 4, 5), repeats=1))
    three = run_bench(BenchCase(sizes=(3, 4, 5), repeats=3))
    for a, b in zip(one, three):
        assert a.x.tobytes() == b.x.tobytes()
        assert a.iterations == b.iterations


def test_failed_method_does_not_abort_case():
    recs = run_bench(BenchCase(sizes=(4, 4), repeats=1, cap=10))
    direct, cg = recs
    assert not direct.converged and direct.error.startswith("OverflowGuard")
    assert cg.converged and cg.error is None


def test_legendre_case():
    recs = run_bench(BenchCase(sizes=(4, 4, 4), problem="legendre", repeats=1))
    assert all(r.converged for r in recs)
    assert np.max(np.abs(recs[0].x - recs[1].x)) <= 1e-6


def test_bench_case_validation():
    with pytest.raises(ValueError):
        BenchCase(sizes=(2,), repeats=0)
    with pytest.raises(ValueError):
        BenchCase(sizes=(2,), methods=("lsqr",))
    with pytest.raises(ValueError):
        BenchCase(sizes=(2,), problem="chebyshev")


def test_flop_asymmetry_recorded():
    for sizes in [(2, 3), (2, 3, 4, 5), (6, 7, 8, 9)]:
        (rec,) = run_bench(BenchCase(sizes=sizes, methods=("cg",), repeats=1))
        n = int(np.prod(sizes))
        per_apply = n * sum(sizes)
        assert per_apply < n * n
        assert (rec.flops - sum(m**3 for m in sizes)) == per_apply * (rec.iterations + 2)


def test_flop_parity_at_two_by_two():
    # sum(m) == prod(m) only for sizes (2, 2): staged and dense matvec cost tie
    op, _, _ = gen_random((2, 2), 0)
    assert op.flops_per_apply == op.total_dim**2 == 16


def test_parallel_cases_match_sequential():
    cases = [BenchCase(sizes=s, repeats=1, case_id=i) for i, s in enumerate([(2, 3), (3, 4, 2)], 1)]
    seq = run_cases(cases)
    par = run_cases(cases, jobs=2)
    for a, b in zip(seq, par):
        assert (a.case, a.method) == (b.case, b.method)
        assert a.x.tobytes() == b.x.tobytes()


# --- emit_table ---------------------------------------------------------------

def _record(**kw):
    base = dict(case=1, sizes=(10, 11, 12, 13), method="cg", runtime_s=0.5, iterations=12,
                normal_residual=1e-9, true_residual=2.5e-9, flops=789360, converged=True)
    base.update(kw)
    return BenchRecord(**base)


def test_emit_table_empty(tmp_path):
    path = tmp_path / "t.csv"
    emit_table([], path)
    assert path.read_text() == ",".join(TABLE_HEADER) + "\n"


def test_emit_table_one_record_round_trip(tmp_path):
    path = tmp_path / "t.csv"
    rec = _record(normal_residual=1 / 3)
    emit_table([rec], path)
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    (row,) = read_table(path)
    assert row["sizes"] == "10x11x12x13"
    assert float(row["normal_residual"]) == 1 / 3
    assert int(row["flops"]) == 789360 and row["converged"] == "true"


def test_emit_table_four_cases_two_methods(tmp_path):
    path = tmp_path / "t.csv"
    recs = [_record(case=c, method=m) for c in range(1, 5) for m in ("direct", "cg")]
    emit_table(recs, path)
    assert len(path.read_text().splitlines()) == 9


def test_emit_table_deterministic_except_runtime(tmp_path):
    cases = [BenchCase(sizes=(2, 3, 4), repeats=1)]
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_table(run_cases(cases), p1)
    emit_table(run_cases(cases), p2)
    r1, r2 = read_table(p1), read_table(p2)
    for a, b in zip(r1, r2):
        a.pop("runtime_s"), b.pop("runtime_s")
        assert a == b


# --- emit_coeffs ---------------------------------------------------------------

def test_emit_coeffs_identical(tmp_path):
    x = np.array([1.0, -2.0, 3.0])
    path = tmp_path / "c.csv"
    assert emit_coeffs(x, x, path, quiet=True) == 0.0
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == COEFF_HEADER
    assert all(float(r[3]) == 0.0 for r in rows[1:])


def test_emit_coeffs_threshold(tmp_path):
    out = io.StringIO()
    worst = emit_coeffs(np.array([1.0, 0.0]), np.array([1.0, 1e-9]), tmp_path / "c.csv", stream=out)
    assert worst == 0.0
    with open(tmp_path / "c.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["abs_diff"]) for r in rows] == [0.0, 1e-9]
    assert "0.000e+00" in out.getvalue()


def test_emit_coeffs_length_mismatch(tmp_path):
    with pytest.raises(DimensionMismatch):
        emit_coeffs(np.ones(2), np.ones(3), tmp_path / "c.csv")


def test_coeff_agreement_6789(tmp_path):
    direct, cg = run_bench(BenchCase(sizes=(6, 7, 8, 9), repeats=1))
    worst = emit_coeffs(direct.x, cg.x, tmp_path / "c.csv", quiet=True)
    assert worst == coeff_max_diff(direct.x, cg.x)
    assert worst <= 1e-6
