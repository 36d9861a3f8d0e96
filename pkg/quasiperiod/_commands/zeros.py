"""Zeros of a quasipolynomial in a window."""

import argparse

from quasiperiod.consts import TOL_CLUSTER, TOL_ZERO
from quasiperiod.utils.jinja import render_template
from quasiperiod.utils.quasipoly import StripWindow
from quasiperiod.utils.zero_finder import find_zeros
from quasiperiod._commands.report import RunReport, load_function


def register(subparsers) -> None:
    parser = subparsers.add_parser("zeros", help="Locate zeros with multiplicities inside a window.")
    parser.add_argument("--qp", required=True, help="Quasipolynomial or product-form JSON file.")
    parser.add_argument("--window", required=True, help="re_min,re_max,im_min,im_max")
    parser.add_argument(
        "--tol", type=float, default=TOL_ZERO, help="Bound on |Q(z)| / sum |a_n exp(lambda_n z)| at each zero."
    )
    parser.add_argument(
        "--tol-cluster", type=float, default=TOL_CLUSTER, help="Cells below this diameter are clusters."
    )
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> RunReport:
    qp, _ = load_function(args.qp)
    window = StripWindow.from_cli(args.window)
    zeros = find_zeros(qp, window, args.tol, args.tol_cluster)
    report = RunReport(
        command="zeros",
        inputs={"qp": str(args.qp), "window": window.to_dict(), "tol_zero": args.tol, "tol_cluster": args.tol_cluster},
        outputs={"zeros": zeros.to_dict(), "count": zeros.total_multiplicity},
    )
    report.summary = render_template(
        "zeros_summary.md",
        {
            "n_points": len(zeros),
            "total": zeros.total_multiplicity,
            "n_terms": len(qp),
            "window": zeros.window.to_dict(),
            "max_residual": max((e.residual for e in zeros.entries), default=None),
            "tol_zero": args.tol,
            "multiple": sum(1 for e in zeros.entries if e.multiplicity > 1),
        },
    )
    return report
