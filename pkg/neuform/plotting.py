from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .mapper import smooth
from .models import PARAMETER_NAMES, SpeechParams

logger = logging.getLogger(__name__)

DEFAULT_CMAP = "viridis"


def _colors(n: int, cmap: str = DEFAULT_CMAP) -> np.ndarray:
    return matplotlib.colormaps[cmap].resampled(max(n, 2))(np.linspace(0, 1, n))


def plot_copy_reports(
    reports: Mapping[str, Sequence[Mapping[str, Any]]],
    cmap: str = DEFAULT_CMAP,
) -> Figure:
    """Grouped log-scale bars of per-parameter z-MSE.

    Args:
        reports: Copy-synthesis report rows keyed by system label, as
            returned by `read_report`.
        cmap: Colormap of the systems.

    Returns:
        Figure: The bar chart.
    """
    if not reports:
        raise ValueError("Expected at least one report to plot.")
    names = [n for n in PARAMETER_NAMES if n != "vuv"]
    figure = Figure(figsize=(8, 4))
    ax = figure.subplots()
    width = 0.8 / len(reports)
    x = np.arange(len(names))
    for i, ((label, rows), color) in enumerate(
        zip(reports.items(), _colors(len(reports), cmap))
    ):
        mse = {row["parameter"]: row["mse"] for row in rows}
        heights = [mse.get(name) or np.nan for name in names]
        ax.bar(x + i * width, heights, width, label=label, color=color)
    ax.set_xticks(x + 0.4 - width / 2, names)
    ax.set_yscale("log")
    ax.set_ylabel("z-scored MSE")
    ax.legend()
    figure.tight_layout()
    return figure


def plot_sweep(
    rows: Sequence[Mapping[str, Any]], cmap: str = DEFAULT_CMAP
) -> Figure:
    """Z-MSE of every parameter against the factor, one panel per swept parameter.

    Args:
        rows: Sweep report rows, as returned by `read_report`.
        cmap: Colormap of the measured parameters.

    Returns:
        Figure: The sweep curves.
    """
    manipulated = list(dict.fromkeys(row["manipulated"] for row in rows))
    if not manipulated:
        raise ValueError("The sweep report has no rows.")
    measured = [n for n in PARAMETER_NAMES if n != "vuv"]
    colors = dict(zip(measured, _colors(len(measured), cmap)))
    n_cols = min(4, len(manipulated))
    n_rows = int(np.ceil(len(manipulated) / n_cols))
    figure = Figure(figsize=(3.5 * n_cols, 3 * n_rows))
    axes = np.atleast_1d(figure.subplots(n_rows, n_cols, squeeze=False)).ravel()
    for ax, swept in zip(axes, manipulated):
        for name in measured:
            points = sorted(
                (row["factor"], row["mse"])
                for row in rows
                if row["manipulated"] == swept and row["parameter"] == name
            )
            if not points:
                continue
            factors, mse = zip(*points)
            style = "-" if name == swept else ":"
            ax.plot(factors, mse, style, marker="o", label=name, color=colors[name])
        ax.set_title(f"{swept} scaled")
        ax.set_xlabel("factor")
        ax.set_yscale("log")
    for ax in axes[len(manipulated) :]:
        ax.set_visible(False)
    axes[0].set_ylabel("z-scored MSE")
    axes[0].legend(fontsize="small")
    figure.tight_layout()
    return figure


def plot_params(params: SpeechParams, cmap: str = DEFAULT_CMAP) -> Figure:
    """Trajectories of all nine parameters against time."""
    times = params.grid.frame_times()
    figure = Figure(figsize=(8, 10))
    axes = figure.subplots(len(PARAMETER_NAMES), 1, sharex=True)
    for ax, (parameter, values), color in zip(
        axes, params, _colors(len(PARAMETER_NAMES), cmap)
    ):
        if parameter.value == "vuv":
            ax.step(times, values, where="post", color=color)
        else:
            ax.plot(times, values, color=color)
        ax.set_ylabel(parameter.value)
    axes[-1].set_xlabel("time (s)")
    figure.tight_layout()
    return figure


def plot_loss_curve(
    losses: Sequence[float],
    val_losses: Mapping[int, float] | None = None,
    window: int = 100,
) -> Figure:
    """Training loss, its moving average and the validation loss."""
    figure = Figure(figsize=(6, 4))
    ax = figure.subplots()
    steps = np.arange(1, len(losses) + 1)
    ax.plot(steps, losses, alpha=0.3, label="loss")
    ax.plot(steps, smooth(losses, window), label=f"loss ({window}-step mean)")
    if val_losses:
        ax.plot(list(val_losses), list(val_losses.values()), "o-", label="validation")
    ax.set_xlabel("update")
    ax.set_ylabel("MSE")
    ax.set_yscale("log")
    ax.legend()
    figure.tight_layout()
    return figure


def save_figure(figure: Figure, path: str | Path) -> Path:
    """Saves a figure; the format follows the file suffix."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    figure.savefig(path)
    logger.info(f"Wrote {path}.")
    return path
