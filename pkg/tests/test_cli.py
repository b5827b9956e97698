import subprocess
import sys

import numpy as np
import pytest

from kronls.bench import gen_random, read_table
from kronls.cli import main
from kronls.dense import load_vector_csv, save_matrix_csv


@pytest.fixture
def problem_files(tmp_path):
    op, b, x_star = gen_random((3, 4), 5)
    paths = []
    for k, a in enumerate(op.factors):
        p = tmp_path / f"a{k}.csv"
        save_matrix_csv(p, a)
        paths.append(str(p))
    rhs = tmp_path / "b.csv"
    save_matrix_csv(rhs, b[:, None])
    return paths, str(rhs), x_star


def test_bench_writes_table_and_coeffs(tmp_path, capsys):
    out, coeffs = tmp_path / "t.csv", tmp_path / "c.csv"
    rc = main(["bench", "--sizes", "2,3,4,5", "--sizes", "3,3", "--repeats", "1",
               "--out", str(out), "--coeffs", str(coeffs)])
    assert rc == 0
    rows = read_table(out)
    assert [(r["case"], r["sizes"], r["method"]) for r in rows] == [
        ("1", "2x3x4x5", "direct"), ("1", "2x3x4x5", "cg"),
        ("2", "3x3", "direct"), ("2", "3x3", "cg"),
    ]
    assert len(coeffs.read_text().splitlines()) == 10
    assert "max abs_diff" in capsys.readouterr().out


def test_bench_exit_code_when_not_converged(tmp_path):
    rc = main(["bench", "--sizes", "3,4,5", "--method", "cg", "--max-iters", "1",
               "--repeats", "1", "--out", str(tmp_path / "t.csv")])
    assert rc == 2


def test_bench_direct_over_cap_fails_softly(tmp_path):
    out = tmp_path / "t.csv"
    rc = main(["bench", "--sizes", "4,4", "--cap", "10", "--repeats", "1", "--out", str(out)])
    assert rc == 2
    rows = read_table(out)
    assert rows[0]["converged"] == "false" and rows[1]["converged"] == "true"
    rc = main(["bench", "--sizes", "4,4", "--cap", "10", "--allow-materialize",
               "--repeats", "1", "--out", str(out)])
    assert rc == 0


def test_bench_legendre(tmp_path):
    rc = main(["bench", "--sizes", "4,4,4", "--problem", "legendre", "--repeats", "1",
               "--out", str(tmp_path / "t.csv")])
    assert rc == 0


@pytest.mark.parametrize("method", ["cg", "direct", "qr2"])
def test_solve_methods(problem_files, tmp_path, method):
    factors, rhs, x_star = problem_files
    out = tmp_path / "x.csv"
    args = ["solve", "--rhs", rhs, "--method", method, "--out", str(out)]
    for f in factors:
        args += ["--factor", f]
    assert main(args) == 0
    tol = 1e-6 if method == "cg" else 1e-10
    assert np.max(np.abs(load_vector_csv(out) - x_star)) <= tol


def test_solve_qr2_needs_two_factors(problem_files, capsys):
    factors, rhs, _ = problem_files
    rc = main(["solve", "--factor", factors[0], "--rhs", rhs, "--method", "qr2"])
    assert rc == 1
    assert "two factors" in capsys.readouterr().err


def test_bad_sizes_rejected():
    with pytest.raises(SystemExit):
        main(["bench", "--sizes", "2,x"])


def test_help_prints_defaults():
    res = subprocess.run([sys.executable, "-m", "kronls.cli", "bench", "--help"],
                         capture_output=True, text=True, check=True)
    for default in ("1e-08", "random", "both", "42", "table.csv", "67108864", "2,3,4,5"):
        assert default in res.stdout
