"""
Run reports: per-frame and per-epoch CSV tables and the H* trend plot.
"""

import csv
import math
from typing import Iterable, Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

FRAME_COLUMNS = [
    "sequence_id",
    "epoch",
    "frame_id",
    "status",
    "camera_height_unscaled",
    "scale",
    "inliers",
    "scaled_height",
    "L_rec",
    "L_sm",
    "L_cam",
    "L_aux",
    "lambda_aux",
    "lambda_cam",
    "total",
    "error",
]

EPOCH_COLUMNS = [
    "sequence_id",
    "epoch",
    "frames_used",
    "frames_skipped",
    "epoch_height",
    "moving_height",
    "h_star",
]

LOSS_COLUMNS = [
    "frame_id",
    "status",
    "inliers",
    "L_rec",
    "L_sm",
    "L_cam",
    "L_aux",
    "lambda_aux",
    "lambda_cam",
    "total",
    "d_log_scale",
    "error",
]

METRIC_COLUMNS = ["frame_id", "abs_rel", "sq_rel", "rmse", "rmse_log", "a1", "a2", "a3", "count"]

REFINE_COLUMNS = ["step", "loss"]

HISTORY_COLUMNS = ["epoch", "epoch_height", "moving_height", "h_star", "frames_used", "frames_skipped"]


def format_value(value) -> str:
    """Stable text for a CSV cell; None and NaN become empty."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return f"{value:.9g}"
    return str(value)


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Mapping]):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(column)) for column in columns])


def write_h_star_plot(
    path: str,
    series: Mapping[str, Sequence[Optional[float]]],
    truth: Optional[float] = None,
):
    """SVG of H* against epoch for each sequence; epochs start at 1."""
    plt.rcParams["svg.hashsalt"] = "camh"
    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        for sequence_id in sorted(series):
            values = [math.nan if v is None else v for v in series[sequence_id]]
            ax.plot(range(1, len(values) + 1), values, marker="o", label=sequence_id)
        if truth is not None:
            ax.axhline(truth, color="black", linestyle="--", linewidth=1, label="ground truth")
        ax.set_xlabel("epoch")
        ax.set_ylabel("H* (m)")
        ax.set_title("Pseudo camera height")
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
