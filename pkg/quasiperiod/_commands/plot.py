"""Tables and figures from a saved run report."""

import argparse

from quasiperiod.utils.common import load_json
from quasiperiod.utils.plots import write_plots
from quasiperiod._commands.report import RunReport


def register(subparsers) -> None:
    parser = subparsers.add_parser("plot", help="Write CSV tables and SVG figures for a saved report.")
    parser.add_argument("--report", required=True, help="Report JSON written by another subcommand.")
    parser.add_argument("--out-dir", required=True, help="Directory receiving the CSV and SVG files.")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> RunReport:
    written = write_plots(load_json(args.report), args.out_dir)
    report = RunReport(
        command="plot",
        inputs={"report": str(args.report), "out_dir": str(args.out_dir)},
        outputs={"files": sorted(p.name for p in written)},
    )
    report.summary = "\n".join(f"- {p}" for p in written) + "\n"
    return report
