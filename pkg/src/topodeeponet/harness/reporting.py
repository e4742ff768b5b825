"""CSV tables, JSON run reports and matplotlib figures, all written atomically."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .serialization import write_atomic  # noqa: E402

__all__ = ["write_csv", "write_report", "plot_history", "plot_discretization", "plot_sweep",
           "plot_worst_case", "save_figure"]


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, Path):
        return str(x)
    return x


def write_csv(path, rows, header):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    write_atomic(path, buf.getvalue())


def write_report(path, report: dict):
    write_atomic(path, json.dumps(_plain(report), indent=2, sort_keys=True, allow_nan=True))


def save_figure(fig, path):
    """Render to a temporary buffer and write atomically."""
    buf = io.StringIO()
    fig.savefig(buf, format="svg", bbox_inches="tight")
    plt.close(fig)
    write_atomic(path, buf.getvalue())


def plot_history(history, path):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    epochs = [h["epoch"] for h in history]
    ax.semilogy(epochs, [h["train_mse"] for h in history], label="train")
    ax.semilogy(epochs, [h["validation_mse"] for h in history], label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("MSE")
    ax.legend()
    save_figure(fig, path)


def _positive(values, floor=1e-17):
    return [max(v, floor) if math.isfinite(v) else float("nan") for v in values]


def plot_discretization(rows, path, deltas=()):
    """``rows`` are (sensor count, certified error) pairs."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ks = [r[0] for r in rows]
    ax.loglog(ks, _positive([r[1] for r in rows]), marker="o", label="certified")
    for d in deltas:
        ax.axhline(d, color="grey", linestyle=":", linewidth=1)
    ax.set_xlabel("sensor count k")
    ax.set_ylabel("sup error over V")
    ax.legend()
    save_figure(fig, path)


def plot_sweep(values, errors, parameter, path, tolerances=None):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(values, _positive(errors), marker="o", label="empirical sup")
    if tolerances is not None:
        ax.plot(values, tolerances, linestyle="--", label="tolerance")
    ax.set_yscale("log")
    ax.set_xlabel(parameter)
    ax.set_ylabel("sup error")
    ax.legend()
    save_figure(fig, path)


def plot_worst_case(ys, reference, prediction, path, title=""):
    """Reference and model output along the first y-coordinate for one element."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    y = np.asarray(ys)[:, 0]
    order = np.argsort(y, kind="stable")
    ax.plot(y[order], np.asarray(reference)[order, 0], label="oracle")
    ax.plot(y[order], np.asarray(prediction)[order, 0], linestyle="--", label="model")
    ax.set_xlabel("y")
    ax.set_ylabel("G(u)(y)")
    if title:
        ax.set_title(title)
    ax.legend()
    save_figure(fig, path)
