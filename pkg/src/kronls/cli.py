"""Command line entry point: ``kronls bench`` and ``kronls solve``."""
from __future__ import annotations

import argparse
import logging
import sys


from . import dense
from .bench import BenchCase, emit_coeffs, emit_table, run_cases
from .dense import load_matrix_csv, load_vector_csv, save_matrix_csv
from .errors import KronLSError
from .kron import KronOperator
from .solvers import DEFAULT_TOL, CgConfig, solve_cg, solve_direct_dense, solve_direct_qr2

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2


def _sizes(text):
    try:
        sizes = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}")
    if not sizes or any(m < 1 for m in sizes):
        raise argparse.ArgumentTypeError(f"sizes must be positive integers, got {text!r}")
    return sizes


def _add_solver_args(p):
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="CG relative residual tolerance")
    p.add_argument("--max-iters", type=int, default=0, help="CG iteration cap, 0 = 10*N")
    p.add_argument("--allow-materialize", action="store_true",
                   help="lift the dense materialization cap for the direct method")
    p.add_argument("--cap", type=int, default=dense.MATERIALIZATION_CAP,
                   help="max entries kron_dense may produce")


def _cg_config(args):
    return CgConfig(tol=args.tol, max_iters=args.max_iters or None)


def _cap(args):
    return sys.maxsize if args.allow_materialize else args.cap


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="kronls", formatter_class=fmt,
        description="Kronecker-product least squares: matrix-free CG and direct solvers.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", formatter_class=fmt, help="time direct vs CG on generated problems")
    b.add_argument("--sizes", type=_sizes, action="append", default=argparse.SUPPRESS,
                   help="comma-separated factor orders; repeat for several cases "
                        "(default: 2,3,4,5)")
    b.add_argument("--problem", choices=["random", "legendre"], default="random",
                   help="problem generator")
    b.add_argument("--method", choices=["direct", "cg", "both"], default="both",
                   help="solvers to time")
    b.add_argument("--seed", type=int, default=42, help="generator seed")
    b.add_argument("--repeats", type=int, default=3, help="timed runs per method (median reported)")
    b.add_argument("--jobs", type=int, default=1, help="run cases in parallel worker processes")
    b.add_argument("--out", default="table.csv", help="timing table CSV")
    b.add_argument("--coeffs", default=argparse.SUPPRESS,
                   help="coefficient comparison CSV for the last case that ran both methods")
    _add_solver_args(b)

    s = sub.add_parser("solve", formatter_class=fmt, help="solve one problem read from CSV files")
    s.add_argument("--factor", action="append", required=True, default=argparse.SUPPRESS,
                   help="CSV file of one square factor A_k; repeat in order")
    s.add_argument("--rhs", required=True, default=argparse.SUPPRESS, help="right-hand side b, one value per line")
    s.add_argument("--method", choices=["cg", "direct", "qr2"], default="cg",
                   help="qr2 is the closed-form method for two factors")
    s.add_argument("--out", default=argparse.SUPPRESS, help="write the solution vector here")
    _add_solver_args(s)
    return parser


def cmd_bench(args):
    methods = ("direct", "cg") if args.method == "both" else (args.method,)
    sizes_list = getattr(args, "sizes", None) or [(2, 3, 4, 5)]
    cases = [
        BenchCase(sizes=sizes, problem=args.problem, seed=args.seed, methods=methods,
                  cg=_cg_config(args), repeats=args.repeats, case_id=i, cap=_cap(args))
        for i, sizes in enumerate(sizes_list, start=1)
    ]
    records = run_cases(cases, jobs=args.jobs)
    emit_table(records, args.out)

    failed = False
    for rec in records:
        status = "ok" if rec.converged else f"FAILED ({rec.error or 'not converged'})"
        print(f"case {rec.case} {'x'.join(map(str, rec.sizes)):>12} {rec.method:>6} "
              f"{rec.runtime_s:10.4f}s  iters={rec.iterations:<5d} "
              f"true_res={rec.true_residual:.2e}  {status}")
        failed |= not rec.converged
    print(f"wrote {args.out}")

    if getattr(args, "coeffs", None):
        by_case = {}
        for rec in records:
            if rec.x is not None:
                by_case.setdefault(rec.case, {})[rec.method] = rec.x
        both = [c for c, xs in by_case.items() if {"direct", "cg"} <= xs.keys()]
        if both:
            xs = by_case[both[-1]]
            emit_coeffs(xs["direct"], xs["cg"], args.coeffs)
            print(f"wrote {args.coeffs}")
        else:
            print("no case ran both methods; coefficient CSV not written", file=sys.stderr)
    return EXIT_NOT_CONVERGED if failed else EXIT_OK


def cmd_solve(args):
    factors = [load_matrix_csv(p) for p in args.factor]
    b = load_vector_csv(args.rhs)
    op = KronOperator(factors)
    if args.method == "cg":
        report = solve_cg(op, b, _cg_config(args))
    elif args.method == "qr2":
        if op.n != 2:
            raise KronLSError("qr2 needs exactly two factors")
        report = solve_direct_qr2(factors[0], factors[1], b)
    else:
        report = solve_direct_dense(op, b, cap=_cap(args))
    print(f"method={args.method} N={op.total_dim} iterations={report.iterations} "
          f"normal_residual={report.normal_residual:.3e} true_residual={report.true_residual:.3e} "
          f"time={report.wall_time_seconds:.4f}s flops={report.flops} converged={report.converged}")
    if getattr(args, "out", None):
        save_matrix_csv(args.out, report.x[:, None])
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "bench":
            return cmd_bench(args)
        return cmd_solve(args)
    except (KronLSError, ValueError, OSError) as exc:
        print(f"kronls: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
