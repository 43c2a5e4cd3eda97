"""report: markdown and HTML tables rendered from the benchmark CSVs alone."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from evidential_nav.stages.common import read_csv
from evidential_nav.utils.constants import (
    LEARNING_RESULTS_FILE,
    MAP_SUMMARY_FILE,
    NAV_SUMMARY_FILE,
    REPORT_FILE,
    UNEVENNESS_BINS_FILE,
)
from evidential_nav.utils.report_rendering import convert_md_to_html


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return "-" if np.isnan(value) else f"{value:.4f}"
    return str(value)


def markdown_table(frame: pd.DataFrame) -> str:
    header = "| " + " | ".join(str(c) for c in frame.columns) + " |"
    rule = "|" + "|".join("---" for _ in frame.columns) + "|"
    body = ["| " + " | ".join(_cell(v) for v in row) + " |" for row in frame.itertuples(index=False)]
    return "\n".join([header, rule, *body])


def learning_table(results: pd.DataFrame) -> pd.DataFrame:
    table = pd.DataFrame({"method": results["method"]})
    for subset, label in (("overall", "Overall"), ("id", "ID"), ("ood", "OOD")):
        table[label] = [
            "-" if np.isnan(m) else f"{m:.4f} ± {s:.4f}"
            for m, s in zip(results[f"{subset}_mean"], results[f"{subset}_std"])
        ]
    return table


def render(out_dir: Path) -> str:
    out_dir = Path(out_dir)
    learning = read_csv(out_dir / LEARNING_RESULTS_FILE, "eval-learning")
    bins = read_csv(out_dir / UNEVENNESS_BINS_FILE, "eval-learning")
    nav = read_csv(out_dir / NAV_SUMMARY_FILE, "bench-nav")

    sections = ["# Traversability learning and navigation benchmark", ""]
    if (out_dir / MAP_SUMMARY_FILE).exists():
        maps = read_csv(out_dir / MAP_SUMMARY_FILE, "gen-maps").drop(columns="file", errors="ignore")
        sections += ["## Maps", "", markdown_table(maps), ""]
    sections += [
        "## Prediction error (EMD², mean ± std over seeds)", "",
        markdown_table(learning_table(learning)), "",
        "## Error against footprint unevenness", "",
        markdown_table(bins), "",
        "## Navigation", "",
        markdown_table(nav), "",
    ]
    return "\n".join(sections)


def run(out_dir: Path) -> tuple[Path, Path]:
    md_path = Path(out_dir) / REPORT_FILE
    md_path.write_text(render(out_dir))
    return md_path, convert_md_to_html(md_path)
