"""Render sweep-result CSVs into publication-style comparison figures.

The input contract is the simulator's results CSV (one row per method per
trial per operating point); this package never imports the simulator.  Each
figure aggregates per-point means with standard-error bars, one curve per
method (and per subregion division when several are present).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "maisac-plots"  # deterministic SVG ids

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

FIGURE_KINDS = ("nmse_vs_snr", "mae_vs_snr", "metric_vs_cr")

REQUIRED_COLUMNS = {
    "nmse_vs_snr": ["method", "snr_db", "subregion_div", "nmse"],
    "mae_vs_snr": ["method", "snr_db", "subregion_div", "angle_mae_deg", "distance_mae_m"],
    "metric_vs_cr": ["method", "cr_ports", "cr_subcarriers", "subregion_div",
                     "nmse", "ospa_m"],
}

METHOD_ORDER = ("nomp_lsrc", "omp_lsrc", "omp2d", "omp3d")
MARKERS = {"nomp_lsrc": "o", "omp_lsrc": "s", "omp2d": "^", "omp3d": "v"}


@dataclass(frozen=True)
class PlotSpec:
    """One figure request: which CSV, which curve family, where to write."""

    csv_path: str
    kind: str
    out_path: str
    group_by: tuple = ("method", "subregion_div")


class PlotDataError(ValueError):
    """The CSV cannot support the requested figure."""


def load_results(csv_path, kind: str) -> pd.DataFrame:
    df = pd.read_csv(csv_path)
    missing = [c for c in REQUIRED_COLUMNS[kind] if c not in df.columns]
    if missing:
        raise PlotDataError(
            f"{csv_path}: missing columns {missing}; found {list(df.columns)}"
        )
    if df.empty:
        raise PlotDataError(f"{csv_path}: no data rows")
    return df


def aggregate(df: pd.DataFrame, x_col: str, y_col: str, group_cols) -> pd.DataFrame:
    """Per-(group, x) mean, standard error, and count of one metric column.

    Means are computed with np.mean over each group's values in CSV row
    order, so recomputing them the obvious way reproduces the plotted values
    bit for bit.
    """
    grouped = df.groupby([*group_cols, x_col], sort=True)[y_col]
    out = grouped.agg(
        mean=lambda s: float(np.mean(s.to_numpy())),
        std=lambda s: float(np.std(s.to_numpy(), ddof=1)) if len(s) > 1 else 0.0,
        n="count",
    ).reset_index()
    out["stderr"] = out["std"] / np.sqrt(out["n"])
    return out.sort_values([*group_cols, x_col]).reset_index(drop=True)


def _curve_label(key, group_cols, df) -> str:
    parts = dict(zip(group_cols, key if isinstance(key, tuple) else (key,)))
    label = parts.get("method", "?")
    if "subregion_div" in parts and df["subregion_div"].nunique() > 1:
        label += f" ({parts['subregion_div']})"
    return label


def _sorted_groups(agg: pd.DataFrame, group_cols):
    keys = [tuple(k) for k in agg[list(group_cols)].drop_duplicates().itertuples(index=False)]

    def order(key):
        method = dict(zip(group_cols, key)).get("method", "")
        rank = METHOD_ORDER.index(method) if method in METHOD_ORDER else len(METHOD_ORDER)
        return (rank,) + key
    return sorted(keys, key=order)


def _plot_metric(ax, df, x_col, y_col, group_cols, log_y):
    agg = aggregate(df, x_col, y_col, group_cols)
    for key in _sorted_groups(agg, group_cols):
        sel = agg
        for col, val in zip(group_cols, key):
            sel = sel[sel[col] == val]
        label = _curve_label(key, group_cols, df)
        method = dict(zip(group_cols, key)).get("method", "")
        ax.errorbar(sel[x_col], sel["mean"], yerr=sel["stderr"],
                    marker=MARKERS.get(method, "d"), capsize=2.5, label=label)
    if log_y:
        ax.set_yscale("log")
    ax.grid(True, which="both", alpha=0.3)
    ax.set_xlabel(x_col.replace("_", " "))
    ax.set_ylabel(y_col.replace("_", " "))
    ax.legend(fontsize=8)
    return agg


def _varying_cr_axes(df) -> list:
    axes = [c for c in ("cr_ports", "cr_subcarriers") if df[c].nunique() > 1]
    if not axes:
        raise PlotDataError("neither cr_ports nor cr_subcarriers varies in the CSV")
    return axes


def render(spec: PlotSpec):
    """Draw the requested figure, write it, and return the Figure object."""
    if spec.kind not in FIGURE_KINDS:
        raise PlotDataError(f"unknown figure kind {spec.kind!r}; pick from {FIGURE_KINDS}")
    df = load_results(spec.csv_path, spec.kind)
    group_cols = tuple(spec.group_by)

    if spec.kind == "nmse_vs_snr":
        fig, ax = plt.subplots(figsize=(5.5, 4.2), constrained_layout=True)
        _plot_metric(ax, df, "snr_db", "nmse", group_cols, log_y=True)
        ax.set_title("Channel NMSE versus SNR")
    elif spec.kind == "mae_vs_snr":
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 4.2), constrained_layout=True)
        _plot_metric(ax1, df, "snr_db", "angle_mae_deg", group_cols, log_y=True)
        ax1.set_title("Angle MAE versus SNR")
        _plot_metric(ax2, df, "snr_db", "distance_mae_m", group_cols, log_y=True)
        ax2.set_title("Distance MAE versus SNR")
    else:  # metric_vs_cr
        axes_to_plot = _varying_cr_axes(df)
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 4.2), constrained_layout=True)
        for x_col in axes_to_plot:
            sub = df if len(axes_to_plot) == 1 else _rows_varying_only(df, x_col)
            _plot_metric(ax1, sub, x_col, "nmse", group_cols, log_y=True)
            _plot_metric(ax2, sub, x_col, "ospa_m", group_cols, log_y=False)
        label = " / ".join(a.replace("_", " ") for a in axes_to_plot)
        ax1.set_title(f"Channel NMSE versus {label}")
        ax2.set_title(f"OSPA versus {label}")

    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    if out.suffix == ".svg":
        # drop the embedded timestamp so re-rendering is byte-identical
        fig.savefig(out, metadata={"Date": None})
    else:
        fig.savefig(out)
    plt.close(fig)
    return fig


def _rows_varying_only(df, x_col):
    """Rows where the OTHER compression axis sits at its maximum (baseline)."""
    other = "cr_subcarriers" if x_col == "cr_ports" else "cr_ports"
    return df[df[other] == df[other].max()]
