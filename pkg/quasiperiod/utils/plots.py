"""CSV tables and static SVG figures derived from run reports."""

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)

ZERO_COLUMNS = ["re", "im", "mult", "residual"]
TAU_COLUMNS = ["tau", "displacement"]
DIFFERENCE_COLUMNS = ["re", "im"]


def zeros_frame(outputs: dict) -> pd.DataFrame:
    """One row per zero; columns re, im, mult, residual."""
    rows = outputs.get("zeros", {}).get("zeros", []) if isinstance(outputs.get("zeros"), dict) else []
    return pd.DataFrame(rows, columns=ZERO_COLUMNS)


def taus_frame(outputs: dict) -> pd.DataFrame:
    """One row per verified translation number; columns tau, displacement."""
    scan = outputs.get("almost_periods") or {}
    data = {"tau": scan.get("taus", []), "displacement": scan.get("displacements", [])}
    return pd.DataFrame(data, columns=TAU_COLUMNS)


def differences_frame(outputs: dict) -> pd.DataFrame:
    """One row per element of the difference set; columns re, im."""
    return pd.DataFrame(outputs.get("differences", []), columns=DIFFERENCE_COLUMNS)


def _scatter(df: pd.DataFrame, x: str, y: str, title: str, path: Path, line: bool = False) -> None:
    fig, ax = plt.subplots(figsize=(6, 6))
    if line:
        ax.plot(df[x], df[y], marker=".", linewidth=0.8)
    else:
        ax.scatter(df[x], df[y], s=8)
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    ax.set_title(title)
    ax.grid(True, linewidth=0.3)
    # fixed metadata keeps the SVG byte-stable
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_plots(report: dict, out_dir: str | Path) -> list[Path]:
    """Write every table the report supports, each as CSV plus SVG. A zero table is always written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = report.get("outputs", {}) if isinstance(report, dict) else {}
    written = []

    tables = [("zeros", zeros_frame(outputs), "re", "im", "Zeros", False)]
    if "almost_periods" in outputs:
        tables.append(("taus", taus_frame(outputs), "tau", "displacement", "Translation numbers", True))
    if "differences" in outputs:
        tables.append(("differences", differences_frame(outputs), "re", "im", "Difference set", False))

    for name, df, x, y, title, line in tables:
        csv_path = out_dir / f"{name}.csv"
        df.to_csv(csv_path, index=False)
        svg_path = out_dir / f"{name}.svg"
        _scatter(df, x, y, title, svg_path, line)
        written.extend([csv_path, svg_path])
        logger.info(f"Wrote {len(df)} rows to {csv_path}")
    return written
