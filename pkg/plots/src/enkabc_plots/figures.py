"""Render figures from experiment CSV output.

Every figure is a pure function of the CSV content: nothing is recomputed
beyond kernel-density bandwidth selection for the posterior panels.
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGURE_KINDS = ("rmse_vs_eps", "rmse_vs_T", "sd_vs_eps", "posterior_panels")

_SUMMARY_KINDS = {
    "rmse_vs_eps": ("epsilon", "rmse"),
    "rmse_vs_T": ("T", "rmse"),
    "sd_vs_eps": ("epsilon", "sd"),
}


class MissingColumnsError(ValueError):
    """A required CSV column is absent; the message names every one."""

    def __init__(self, path, columns):
        self.columns = tuple(columns)
        super().__init__(f"{path}: missing column(s): {', '.join(self.columns)}")


@dataclass
class FigureSpec:
    """One figure request: inputs, kind, method filter, output image path."""

    inputs: tuple
    kind: str
    output: str
    methods: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(
                f"unknown figure kind {self.kind!r}; choose from {FIGURE_KINDS}"
            )
        self.inputs = tuple(str(p) for p in np.atleast_1d(self.inputs))
        if not self.inputs:
            raise ValueError("need at least one input CSV")
        self.methods = tuple(np.atleast_1d(self.methods)) if self.methods else ()


def _read_rows(path, required):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise MissingColumnsError(path, missing)
        return list(reader)


def _series_label(row):
    label = row["method"]
    estimator = row.get("estimator", "")
    if estimator:
        label += f":{estimator}"
    return label


def _method_of_chain(path):
    match = re.match(r"chain_(.+?)_eps[0-9.eE+-]+$", Path(path).stem)
    return match.group(1) if match else Path(path).stem


def normal_reference_bandwidth(values):
    """Normal-reference rule bandwidth 1.06 sigma n^(-1/5)."""
    values = np.asarray(values, dtype=float)
    sigma = values.std(ddof=1)
    return 1.06 * sigma * len(values) ** -0.2


def gaussian_kde(values, grid, bandwidth):
    values = np.asarray(values, dtype=float)
    z = (grid[:, None] - values[None, :]) / bandwidth
    return np.exp(-0.5 * z ** 2).sum(axis=1) / (
        len(values) * bandwidth * math.sqrt(2.0 * math.pi)
    )


def _render_summary(spec):
    x_col, y_col = _SUMMARY_KINDS[spec.kind]
    required = ("method", x_col, y_col)
    rows = []
    for path in spec.inputs:
        rows.extend(_read_rows(path, required))
    if spec.methods:
        rows = [r for r in rows if r["method"] in spec.methods]
    series = {}
    for row in rows:
        label = _series_label(row)
        series.setdefault(label, []).append((float(row[x_col]), float(row[y_col])))

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for label in sorted(series):
        points = sorted(series[label])
        xs = np.array([p[0] for p in points])
        ys = np.array([p[1] for p in points])
        finite = np.isfinite(ys) & (ys > 0.0)
        ax.plot(xs[finite], ys[finite], marker="o", label=label)
    ax.set_yscale("log")
    if x_col == "epsilon":
        ax.set_xscale("log")
        ax.set_xlabel("tolerance")
    else:
        ax.set_xlabel("number of steps")
    ax.set_ylabel(y_col.upper() if y_col == "rmse" else y_col.capitalize())
    ax.legend(fontsize=8)
    return fig


def _render_posteriors(spec):
    per_method = {}
    theta_cols = None
    for path in spec.inputs:
        rows = _read_rows(path, ("iter",))
        if not rows:
            continue
        cols = [c for c in rows[0] if re.fullmatch(r"theta_\d+", c)]
        if not cols:
            raise MissingColumnsError(path, ("theta_1",))
        cols = sorted(cols, key=lambda c: int(c.split("_")[1]))
        if theta_cols is None:
            theta_cols = cols
        method = _method_of_chain(path)
        per_method[method] = np.array(
            [[float(r[c]) for c in cols] for r in rows]
        )
    if spec.methods:
        per_method = {m: v for m, v in per_method.items() if m in spec.methods}
    if not per_method:
        raise ValueError("no chain samples to plot")

    d = len(theta_cols)
    fig, axes = plt.subplots(1, d, figsize=(4.0 * d, 3.5))
    axes = np.atleast_1d(axes)
    bandwidths = []
    for i, ax in enumerate(axes):
        for method in sorted(per_method):
            values = per_method[method][:, i]
            if np.ptp(values) == 0.0:
                ax.axvline(values[0], label=method, linestyle="--")
                continue
            bw = normal_reference_bandwidth(values)
            bandwidths.append(bw)
            lo, hi = values.min() - 3 * bw, values.max() + 3 * bw
            grid = np.linspace(lo, hi, 400)
            ax.plot(grid, gaussian_kde(values, grid, bw), label=method)
        ax.set_xlabel(f"theta_{i + 1}")
        if i == 0:
            ax.set_ylabel("density")
            ax.legend(fontsize=8)
    footer = "normal-reference bandwidths: " + ", ".join(
        f"{bw:.3g}" for bw in bandwidths
    )
    fig.text(0.01, 0.01, footer, fontsize=6)
    return fig


def render(spec):
    """Render one figure spec and write the image; returns the figure."""
    if spec.kind == "posterior_panels":
        fig = _render_posteriors(spec)
    else:
        fig = _render_summary(spec)
    fig.tight_layout(rect=(0, 0.03, 1, 1))
    fig.savefig(spec.output, dpi=150)
    plt.close(fig)
    return fig
