"""Command-line entry point."""

import argparse
import logging
import sys
import time

from quasiperiod import __version__
from quasiperiod._commands import COMMANDS
from quasiperiod._commands.report import RunReport
from quasiperiod.app_logging import WarningCollector, setup_logging
from quasiperiod.consts import EXIT_NUMERICAL
from quasiperiod.errors import QuasiperiodError
from quasiperiod.utils.common import dump_json

logger = logging.getLogger(__name__)

INTERNAL_ERROR_CODE = "INTERNAL"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quasiperiod", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-dir", help="Also log to a rotating file in this directory.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level.")
    parser.add_argument("--out", help="Write the JSON report here instead of stdout.")
    parser.add_argument("--summary", help="Write the markdown summary here instead of stderr.")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def navigator(args: argparse.Namespace) -> RunReport:
    """Run the chosen subcommand, turning library errors into an error report."""
    start = time.perf_counter()
    with WarningCollector() as collector:
        try:
            report = args.handler(args)
        except QuasiperiodError as exc:
            logger.error(f"{exc.code}: {exc}")
            report = RunReport(
                command=args.command,
                outputs={"error": {"code": exc.code, "message": str(exc)}},
                exit_code=exc.exit_code,
                summary=f"Error {exc.code}: {exc}\n",
            )
        except Exception as exc:
            logger.exception(f"Unexpected failure in {args.command}")
            report = RunReport(
                command=args.command,
                outputs={"error": {"code": INTERNAL_ERROR_CODE, "message": f"{type(exc).__name__}: {exc}"}},
                exit_code=EXIT_NUMERICAL,
                summary=f"Internal error: {type(exc).__name__}: {exc}\n",
            )
    report.timing = time.perf_counter() - start
    report.warnings = collector.messages
    return report


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_dir, logging.DEBUG if args.verbose else logging.INFO)
    report = navigator(args)

    payload = dump_json(report.to_dict(), args.out)
    if args.out is None:
        print(payload)
    if args.summary:
        with open(args.summary, "w", encoding="utf-8") as f:
            f.write(report.summary)
    elif report.summary:
        print(report.summary, file=sys.stderr, end="" if report.summary.endswith("\n") else "\n")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
