"""Figure rendering for training histories and metric reports.

Figures are written next to the delimited files the CLI emits, using the
non-interactive backend so runs work headless.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluation import MetricRow
from .training import HistoryRow


def render_history(rows: list[HistoryRow], path) -> None:
    """Objective and regularizer curves on top, dev accuracy below."""
    epochs = [r.epoch for r in rows]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(epochs, [r.objective for r in rows], marker="o", label="objective")
    if any(r.reg_term != 0.0 for r in rows):
        ax1.plot(epochs, [r.reg_term for r in rows], marker="s",
                 label="regularizer term")
    ax1.set_ylabel("value")
    ax1.legend(loc="best")
    ax1.set_title("training objective")

    accs = [r.dev_accuracy for r in rows]
    if any(not math.isnan(a) for a in accs):
        ax2.plot(epochs, accs, marker="o", color="tab:green")
        ax2.set_ylim(0.0, 1.05)
    else:
        ax2.text(0.5, 0.5, "no dev labels", ha="center", va="center",
                 transform=ax2.transAxes)
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("dev accuracy")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_metrics(rows: list[MetricRow], path) -> None:
    """Grouped accuracy bars per aspect, one color per method, std as error bars."""
    aspects = sorted({r.aspect for r in rows})
    methods = sorted({r.method for r in rows})
    by_key = {(r.aspect, r.method): r for r in rows}
    width = 0.8 / max(1, len(methods))
    fig, ax = plt.subplots(figsize=(max(6, 1.5 * len(aspects)), 4))
    for mi, method in enumerate(methods):
        xs, ys, errs = [], [], []
        for ai, aspect in enumerate(aspects):
            row = by_key.get((aspect, method))
            if row is None:
                continue
            xs.append(ai + (mi - (len(methods) - 1) / 2) * width)
            ys.append(row.mean)
            errs.append(row.std)
        ax.bar(xs, ys, width=width, yerr=errs, capsize=3, label=method)
    ax.set_xticks(range(len(aspects)))
    ax.set_xticklabels(aspects, rotation=20, ha="right")
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("accuracy")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
