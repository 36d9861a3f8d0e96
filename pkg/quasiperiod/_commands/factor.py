"""Periodic factorization of a quasipolynomial on a window, with the zero-free quotient certificate."""

import argparse
import logging
import math

from quasiperiod.consts import DEFAULT_BUDGET, EXIT_NEGATIVE, EXIT_OK, TOL_CLUSTER, TOL_ZERO
from quasiperiod.errors import NoLineStructure, SpacingMismatch, SpectrumMismatch
from quasiperiod.utils.factorizer import (
    PeriodicFactor,
    factor_from_divisor,
    fit_cosh_form,
    quotient_certify,
    verify_tail_bound,
)
from quasiperiod.utils.jinja import render_template
from quasiperiod.utils.period_engine import decompose
from quasiperiod.utils.quasipoly import StripWindow
from quasiperiod.utils.zero_finder import find_zeros
from quasiperiod._commands.report import RunReport, load_function, parse_substrip

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("factor", help="Split off periodic factors and certify the quotient zero-free.")
    parser.add_argument("--qp", required=True, help="Quasipolynomial or product-form JSON file.")
    parser.add_argument("--window", required=True, help="re_min,re_max,im_min,im_max")
    parser.add_argument("--budget", type=float, default=DEFAULT_BUDGET, help="Total tail budget over all factors.")
    parser.add_argument("--tol-zero", type=float, default=TOL_ZERO, help="Residual tolerance for zero finding.")
    parser.add_argument(
        "--substrip",
        action="append",
        default=[],
        help="re_min,re_max of a nested substrip for the fallback decomposition.",
    )
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> RunReport:
    qp, _ = load_function(args.qp)
    window = StripWindow.from_cli(args.window)
    zeros = find_zeros(qp, window, args.tol_zero)
    Z = zeros.to_divisor()

    fit = None
    factors: list[PeriodicFactor]
    try:
        fit = fit_cosh_form(qp, zeros, window)
        factors = [factor_from_divisor(Z, math.pi / fit.form.omega, window, args.budget)]
    except (NoLineStructure, SpacingMismatch, SpectrumMismatch) as exc:
        logger.info(f"No cosh-product fit ({exc}); factoring the periodic decomposition")
        substrips = [parse_substrip(s, window) for s in args.substrip] or [window]
        dec, _ = decompose(Z, Z, substrips, merge_tol=TOL_CLUSTER)
        share = args.budget / len(dec.parts)
        factors = [
            factor_from_divisor(part.divisor, part.period, window, share) for part in dec.parts if len(part.divisor)
        ]

    deviation = max((verify_tail_bound(f) for f in factors), default=0.0)
    min_modulus, count = quotient_certify(qp, factors, window, args.tol_zero)
    certified = count == 0 and min_modulus > 0
    total_bound = sum(f.total_bound for f in factors)

    report = RunReport(
        command="factor",
        inputs={
            "qp": str(args.qp),
            "window": window.to_dict(),
            "budget": args.budget,
            "tol_zero": args.tol_zero,
            "substrips": args.substrip,
        },
        outputs={
            "zeros": zeros.to_dict(),
            "fit": fit.to_dict() if fit is not None else None,
            "factors": [f.to_dict() for f in factors],
            "total_bound": total_bound,
            "tail_deviation": deviation,
            "quotient": {"min_modulus": min_modulus, "zero_count": count, "certified": certified},
        },
        exit_code=EXIT_OK if certified else EXIT_NEGATIVE,
    )
    report.summary = render_template(
        "factor_summary.md",
        {
            "fit": (
                {
                    "n_factors": fit.form.n_factors,
                    "omega": fit.form.omega,
                    "beta": fit.form.beta,
                    "residual": fit.residual,
                }
                if fit is not None
                else None
            ),
            "n_factors": len(factors),
            "total_bound": total_bound,
            "budget": args.budget,
            "certified": certified,
            "zero_count": count,
            "min_modulus": min_modulus,
        },
    )
    return report
