"""Report emission: delimited output with self-describing headers, JSON
mirrors, and matplotlib figures rendered next to the delimited files.

Every report embeds the engine version and the full run configuration
as '#'-prefixed comment lines, so an output file identifies the run
that produced it.  Figures are rendered with the Agg backend straight
to PNG beside the CSV; cache hits must reproduce reports byte for
byte, so nothing time- or host-dependent goes into the files.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .exact import ENGINE_VERSION

__all__ = [
    "config_header",
    "write_csv",
    "write_json",
    "render_trend_figure",
    "render_histogram_figure",
    "render_table_figure",
]


def config_header(command: str, config: dict) -> list:
    lines = [f"# miscost {ENGINE_VERSION} report", f"# command: {command}"]
    for key in sorted(config):
        lines.append(f"# {key}: {config[key]}")
    return lines


def write_csv(path, command: str, config: dict, columns, rows) -> Path:
    """Rows are dicts; missing cells become empty fields."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out = []
    out.extend(config_header(command, config))
    out.append(",".join(columns))
    for row in rows:
        out.append(",".join(_cell(row.get(c)) for c in columns))
    path.write_text("\n".join(out) + "\n")
    return path


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_json(path, command: str, config: dict, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "engine_version": ENGINE_VERSION,
        "command": command,
        "config": {k: str(v) for k, v in config.items()},
        "report": payload,
    }
    path.write_text(json.dumps(doc, indent=2, default=str) + "\n")
    return path


def render_trend_figure(path, title, x_values, series: dict, xlabel="n", logx=True,
                        ylabel="ratio", hline=None):
    """One line per named series over a common x grid."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for name, ys in series.items():
        ax.plot(x_values, [float(y) for y in ys], marker="o", label=name)
    if hline is not None:
        ax.axhline(hline, color="grey", lw=0.8, ls="--")
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_histogram_figure(path, title, values, bins=60, overlay_normal=True):
    """Standardized sample histogram with the N(0,1) density overlaid."""
    x = np.asarray(values, dtype=np.float64)
    sd = x.std(ddof=1) if len(x) > 1 else 1.0
    z = (x - x.mean()) / (sd if sd > 0 else 1.0)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.hist(z, bins=bins, density=True, alpha=0.7)
    if overlay_normal:
        grid = np.linspace(min(-4, z.min()), max(4, z.max()), 400)
        ax.plot(grid, np.exp(-grid ** 2 / 2) / np.sqrt(2 * np.pi), lw=1.2)
    ax.set_title(title)
    ax.set_xlabel("standardized cost")
    ax.set_ylabel("density")
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_table_figure(path, title, x_values, named_log_values, xlabel="n"):
    """Log-scale magnitudes of several sequences on one axis."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for name, ys in named_log_values.items():
        ax.plot(x_values, [float(y) for y in ys], marker="s", ms=3, label=name)
    ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("log value")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
