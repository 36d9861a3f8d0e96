"""Reference and random instances."""

import argparse

from quasiperiod.consts import ALPHA_WHITELIST, EXAMPLE1_READING
from quasiperiod.errors import InputError
from quasiperiod.utils.common import dump_json
from quasiperiod.utils.generators import (
    almost_period_from_solution,
    example1,
    example2,
    kronecker_solutions,
    random_product_form,
    random_quasipolynomial,
)
from quasiperiod._commands.report import RunReport

KINDS = ("example1", "example2", "random", "product", "kronecker")


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "gen", help="Generate a reference divisor, a random function or Kronecker solutions."
    )
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--save", help="Write the generated object here.")
    parser.add_argument("--k-max", type=int, default=3, help="example1: number of columns.")
    parser.add_argument("--im-bound", type=float, default=20.0, help="example1/example2: |Im z| bound.")
    parser.add_argument(
        "--alpha", choices=sorted(ALPHA_WHITELIST), default="sqrt2", help="example2/kronecker: cot(alpha)."
    )
    parser.add_argument("--strip-halfwidth", type=float, default=1.0, help="example2: |Re z| bound.")
    parser.add_argument("--n-terms", type=int, default=5, help="random: number of terms.")
    parser.add_argument("--lambda-span", type=float, default=3.0, help="random: frequencies lie in [-span, span].")
    parser.add_argument("--n-factors", type=int, default=2, help="product: number of cosh factors.")
    parser.add_argument("--seed", type=int, default=0, help="random/product: generator seed.")
    parser.add_argument("--delta", type=float, default=0.1, help="kronecker: bound on |m cos(alpha) - n sin(alpha)|.")
    parser.add_argument("--m-max", type=int, default=100, help="kronecker: rows scanned.")
    parser.set_defaults(handler=run)


def _generate(args: argparse.Namespace) -> tuple[dict, dict, dict]:
    """(inputs, generated document, extra outputs) for one kind."""
    if args.kind == "example1":
        doc = example1(args.k_max, args.im_bound).to_dict()
        return {"k_max": args.k_max, "im_bound": args.im_bound}, doc, {"reading": EXAMPLE1_READING}
    if args.kind == "example2":
        doc = example2(args.alpha, args.im_bound, args.strip_halfwidth).to_dict()
        inputs = {"alpha": args.alpha, "im_bound": args.im_bound, "strip_halfwidth": args.strip_halfwidth}
        return inputs, doc, {}
    if args.kind == "random":
        doc = random_quasipolynomial(args.n_terms, args.lambda_span, args.seed).to_dict()
        return {"n_terms": args.n_terms, "lambda_span": args.lambda_span, "seed": args.seed}, doc, {}
    if args.kind == "product":
        doc = random_product_form(args.n_factors, args.seed).to_dict()
        return {"n_factors": args.n_factors, "seed": args.seed}, doc, {}
    if args.kind == "kronecker":
        report = kronecker_solutions(args.alpha, args.delta, args.m_max)
        taus = [almost_period_from_solution(s.m, s.n, args.alpha) for s in report.solutions]
        return {"alpha": args.alpha, "delta": args.delta, "m_max": args.m_max}, report.to_dict(), {"taus": taus}
    raise InputError(f"Unknown kind '{args.kind}'")


def run(args: argparse.Namespace) -> RunReport:
    inputs, doc, extra = _generate(args)
    if args.save:
        dump_json(doc, args.save)
    report = RunReport(
        command="gen",
        inputs={"kind": args.kind, "save": args.save, **inputs},
        outputs={"object": doc, **extra},
    )
    report.summary = f"Generated {args.kind}" + (f" into {args.save}" if args.save else "") + "\n"
    return report
