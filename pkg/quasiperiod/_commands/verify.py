"""Re-check saved period certificates against a divisor."""

import argparse
import logging

from quasiperiod.consts import EXIT_NEGATIVE, EXIT_OK, TOL_VERIFY_PERIOD, TOL_ZERO
from quasiperiod.errors import InputError, ParseError
from quasiperiod.utils.common import load_json
from quasiperiod.utils.divisor_ops import Divisor
from quasiperiod.utils.period_engine import PeriodCertificate, verify_period
from quasiperiod.utils.quasipoly import StripWindow
from quasiperiod.utils.zero_finder import find_zeros
from quasiperiod._commands.report import RunReport, load_divisor, load_function

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("verify", help="Re-check a saved certificate or analyze report.")
    parser.add_argument("--certificate", required=True, help="Analyze report or bare certificate JSON file.")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--divisor", help="Divisor JSON file.")
    source.add_argument("--qp", help="Quasipolynomial JSON file; its zeros in --window are checked.")
    parser.add_argument("--window", help="re_min,re_max,im_min,im_max (required with --qp).")
    parser.add_argument("--tol", type=float, default=TOL_VERIFY_PERIOD, help="Period verification tolerance.")
    parser.set_defaults(handler=run)


def load_certificates(path: str) -> list[PeriodCertificate]:
    """Certificates from an analyze report, or a single bare certificate."""
    doc = load_json(path)
    if isinstance(doc, dict) and "period" in doc:
        return [PeriodCertificate.from_dict(doc)]
    outputs = doc.get("outputs") if isinstance(doc, dict) else None
    if not isinstance(outputs, dict) or not isinstance(outputs.get("certificates"), list):
        raise ParseError(f"{path} holds no certificate", field_path="outputs.certificates")
    certs = [
        PeriodCertificate.from_dict(c, f"outputs.certificates[{i}]") for i, c in enumerate(outputs["certificates"])
    ]
    if not certs:
        raise ParseError(f"{path} holds an empty certificate list", field_path="outputs.certificates")
    return certs


def _divisor(args: argparse.Namespace) -> Divisor:
    if args.divisor:
        return load_divisor(args.divisor)
    if not args.window:
        raise InputError("--window is required with --qp")
    qp, _ = load_function(args.qp)
    return find_zeros(qp, StripWindow.from_cli(args.window), TOL_ZERO).to_divisor()


def run(args: argparse.Namespace) -> RunReport:
    certs = load_certificates(args.certificate)
    Z = _divisor(args)
    results = []
    for cert in certs:
        checks = [verify_period(Z, cert.period, w, args.tol) for w in cert.verified_windows]
        ok = all(checks)
        if not ok:
            logger.warning(f"Period {cert.period} fails on {checks.count(False)} of {len(checks)} windows")
        results.append({"period": cert.period, "windows": len(checks), "ok": ok})
    passed = all(r["ok"] for r in results)
    report = RunReport(
        command="verify",
        inputs={"certificate": str(args.certificate), "divisor": args.divisor, "qp": args.qp, "tol": args.tol},
        outputs={"results": results, "verified": passed},
        exit_code=EXIT_OK if passed else EXIT_NEGATIVE,
    )
    report.summary = "".join(
        f"- period {r['period']:.12g}: {'verified' if r['ok'] else 'FAILED'} on {r['windows']} windows\n"
        for r in results
    )
    return report
