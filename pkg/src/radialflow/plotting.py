"""Report figures, written next to the machine-readable report."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.dpi": 120,
    "savefig.bbox": "tight",
}

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def figsize(width: float = 5.5) -> tuple[float, float]:
    return (width, width * GOLDEN)


def figure_path(output: str | Path, suffix: str = "") -> Path:
    """``report.json`` -> ``report.png`` (or ``report-<suffix>.png``)."""
    output = Path(output)
    stem = output.stem + (f"-{suffix}" if suffix else "")
    return output.with_name(stem + ".png")


def _save(fig, path: Path) -> Path:
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_voltage_profiles(
    v_mag: Mapping[str, Sequence[float]], path: str | Path, title: str = ""
) -> Path:
    """Voltage magnitude per bus, one series per policy."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=figsize())
        for name, values in v_mag.items():
            ax.plot(np.arange(len(values)), values, marker="o", ms=3, label=name)
        ax.set_xlabel("bus id")
        ax.set_ylabel("|V| [pu]")
        if title:
            ax.set_title(title)
        ax.legend()
        return _save(fig, Path(path))


def plot_margins(records: Sequence[Mapping], path: str | Path) -> Path:
    """Inequality margins per trial, grouped by case and mode, log scale."""
    groups: dict[str, list[float]] = defaultdict(list)
    for rec in records:
        if rec.get("kind") == "trial":
            groups[f"{rec['case']} ({rec['mode']})"].append(float(rec["margin"]))
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=figsize(6.5))
        for label, margins in sorted(groups.items()):
            m = np.asarray(margins)
            ax.plot(np.arange(len(m)), np.where(m > 0, m, np.nan), ".", ms=3, label=label)
            neg = np.flatnonzero(m <= 0)
            if neg.size:
                ax.plot(neg, np.full(neg.size, 1e-16), "x", color="red")
        ax.set_yscale("log")
        ax.set_xlabel("trial")
        ax.set_ylabel("margin (right - left)")
        ax.legend(ncol=2)
        return _save(fig, Path(path))


def plot_sweep(
    bus_ids: Sequence[int],
    setpoints: Mapping[str, Sequence[float]],
    q_max: Sequence[float],
    path: str | Path,
    title: str = "",
) -> Path:
    """Setpoint per controllable bus for each policy, capability as outline."""
    x = np.arange(len(bus_ids))
    width = 0.8 / max(len(setpoints), 1)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=figsize())
        ax.bar(x, q_max, width=0.9, fill=False, edgecolor="0.5", label="q_max")
        for k, (name, values) in enumerate(setpoints.items()):
            ax.bar(x - 0.4 + width * (k + 0.5), values, width=width, label=name)
        ax.set_xticks(x)
        ax.set_xticklabels([str(i) for i in bus_ids])
        ax.set_xlabel("bus id")
        ax.set_ylabel("reactive generation [pu]")
        if title:
            ax.set_title(title)
        ax.legend()
        return _save(fig, Path(path))
