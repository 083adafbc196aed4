"""Panel figures: one row per metric, one column per target acceptance rate.

Lines are pointwise means across replicates on the shared step grid; nothing
else is recomputed here.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

RUN_COLUMNS = (
    "experiment", "sampler", "target_rate", "replicate", "step", "seconds",
    "accepted", "batch_size", "mse_mean", "mse_var", "holdout_acc",
)

# Stable default palette keyed by sampler name; unknown samplers cycle.
DEFAULT_STYLES = {
    "mh": {"color": "#555555", "linestyle": "-"},
    "mala": {"color": "#1f77b4", "linestyle": "-"},
    "barker": {"color": "#2ca02c", "linestyle": "-"},
    "hmc": {"color": "#8c564b", "linestyle": "-"},
    "poissonmh": {"color": "#ff7f0e", "linestyle": "-"},
    "poisson-mala": {"color": "#d62728", "linestyle": "-"},
    "poisson-barker": {"color": "#9467bd", "linestyle": "-"},
    "tunamh": {"color": "#e377c2", "linestyle": "-"},
    "tuna-sgld": {"color": "#17becf", "linestyle": "-"},
    "exchange": {"color": "#bcbd22", "linestyle": "-"},
}

METRIC_LABELS = {
    "mse_mean": "MSE of posterior mean",
    "mse_var": "MSE of posterior variance",
    "holdout_acc": "test accuracy",
}


class SchemaError(ValueError):
    """Input CSV does not carry the documented columns."""


@dataclass
class FigureSpec:
    """What to draw and where to put it."""

    inputs: list
    output: str = "figure"
    formats: list = field(default_factory=lambda: ["png", "svg"])
    metrics: list = field(default_factory=lambda: ["mse_mean", "mse_var"])
    rates: list | None = None  # columns; discovered from the data if None
    samplers: list | None = None  # line set; discovered if None
    styles: dict = field(default_factory=dict)  # sampler -> matplotlib kwargs
    x_axis: str = "seconds"  # or "step"
    zoom: dict | None = None  # e.g. {"x_max": 0.5, "samplers": [...]}
    log_y: bool = True

    @classmethod
    def from_json(cls, path: str) -> "FigureSpec":
        with open(path) as fh:
            raw = json.load(fh)
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise SchemaError(f"unknown figure-spec keys: {sorted(unknown)}")
        return cls(**raw)


def read_run_rows(paths) -> dict:
    """Load RunRecord CSVs into column arrays, validating the schema."""
    columns = {name: [] for name in RUN_COLUMNS}
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in RUN_COLUMNS if c not in header]
            if missing:
                raise SchemaError(f"{path}: missing column {missing[0]!r}")
            n = 0
            for row in reader:
                for name in RUN_COLUMNS:
                    columns[name].append(row[name])
                n += 1
            if n == 0:
                raise SchemaError(f"{path}: no data rows")
    out = {
        "sampler": np.array(columns["sampler"]),
        "target_rate": np.array([float(v) for v in columns["target_rate"]]),
        "replicate": np.array([int(v) for v in columns["replicate"]]),
        "step": np.array([int(v) for v in columns["step"]]),
        "seconds": np.array([float(v) for v in columns["seconds"]]),
    }
    for metric in ("mse_mean", "mse_var", "holdout_acc"):
        out[metric] = np.array([float(v) for v in columns[metric]])
    return out


def replicate_mean_curve(data, sampler, rate, metric, x_axis):
    """Pointwise mean across replicates on the shared step grid."""
    mask = (data["sampler"] == sampler) & (data["target_rate"] == rate)
    steps = np.unique(data["step"][mask])
    xs = np.empty(steps.shape)
    ys = np.empty(steps.shape)
    for k, s in enumerate(steps):
        cell = mask & (data["step"] == s)
        ys[k] = float(np.mean(data[metric][cell]))
        xs[k] = float(np.mean(data["seconds"][cell])) if x_axis == "seconds" else s
    return xs, ys


def _style(spec: FigureSpec, sampler: str, fallback_index: int) -> dict:
    if sampler in spec.styles:
        return dict(spec.styles[sampler])
    if sampler in DEFAULT_STYLES:
        return dict(DEFAULT_STYLES[sampler])
    cycle = list(plt.rcParams["axes.prop_cycle"].by_key()["color"])
    return {"color": cycle[fallback_index % len(cycle)]}


def plot_panels(spec: FigureSpec) -> list:
    """Render the metric-by-rate panel grid; returns the files written."""
    data = read_run_rows(spec.inputs)
    samplers = spec.samplers or sorted(set(data["sampler"]))
    present = set(data["sampler"])
    for s in samplers:
        if s not in present:
            raise SchemaError(f"sampler {s!r} not present in the input CSVs")
    rates = spec.rates or sorted(set(data["target_rate"]))
    for r in rates:
        if not np.any(data["target_rate"] == r):
            raise SchemaError(f"acceptance rate {r} not present in the input CSVs")

    n_rows, n_cols = len(spec.metrics), len(rates)
    fig, axes = plt.subplots(
        n_rows, n_cols, figsize=(4.2 * n_cols, 3.2 * n_rows), squeeze=False
    )
    for i, metric in enumerate(spec.metrics):
        if metric not in METRIC_LABELS:
            raise SchemaError(f"unknown metric {metric!r}")
        for j, rate in enumerate(rates):
            ax = axes[i][j]
            for k, sampler in enumerate(samplers):
                xs, ys = replicate_mean_curve(data, sampler, rate, metric, spec.x_axis)
                ax.plot(xs, ys, label=sampler, **_style(spec, sampler, k))
            if spec.log_y and metric.startswith("mse"):
                ax.set_yscale("log")
            if i == 0:
                ax.set_title(f"acceptance rate = {rate:g}")
            if j == 0:
                ax.set_ylabel(METRIC_LABELS[metric])
            if i == n_rows - 1:
                ax.set_xlabel("seconds" if spec.x_axis == "seconds" else "step")
            if spec.zoom is not None:
                _add_zoom_inset(ax, spec, data, samplers, rate, metric)
    axes[0][0].legend(fontsize=8)
    fig.tight_layout()

    written = []
    out_dir = os.path.dirname(spec.output)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    for fmt in spec.formats:
        path = f"{spec.output}.{fmt}"
        fig.savefig(path)
        written.append(path)
    plt.close(fig)
    return written


def _add_zoom_inset(ax, spec, data, samplers, rate, metric):
    inset = ax.inset_axes([0.45, 0.45, 0.5, 0.5])
    x_max = float(spec.zoom.get("x_max", np.inf))
    zoom_samplers = spec.zoom.get("samplers", samplers)
    for k, sampler in enumerate(zoom_samplers):
        xs, ys = replicate_mean_curve(data, sampler, rate, metric, spec.x_axis)
        keep = xs <= x_max
        inset.plot(xs[keep], ys[keep], **_style(spec, sampler, k))
    if spec.log_y and metric.startswith("mse"):
        inset.set_yscale("log")
    inset.tick_params(labelsize=6)


def plot_mse_panels(spec: FigureSpec) -> list:
    """MSE rows (posterior mean, posterior variance) by acceptance rate."""
    if not spec.metrics or not all(m.startswith("mse") for m in spec.metrics):
        spec.metrics = ["mse_mean", "mse_var"]
    return plot_panels(spec)


def plot_accuracy_panels(spec: FigureSpec) -> list:
    """Holdout-accuracy grid (logistic experiments)."""
    spec.metrics = ["holdout_acc"]
    spec.log_y = False
    return plot_panels(spec)
