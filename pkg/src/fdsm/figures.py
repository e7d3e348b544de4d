"""Matplotlib renderings of the harness outputs.

Every report path can drop a PNG next to its CSV/JSON artefact; these
helpers never show interactive windows (Agg backend) and never change the
numbers they plot.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402 - backend must be set first
import numpy as np  # noqa: E402


def save_metrics_figure(rows: list[dict], path: str | Path) -> None:
    """Loss curves on a log axis with the learning-rate/curriculum schedules
    underneath."""
    if not rows:
        raise ValueError("no metrics rows to plot")
    its = [r["iteration"] for r in rows]
    fig, (ax_loss, ax_sched) = plt.subplots(
        2, 1, figsize=(7.0, 5.4), sharex=True,
        gridspec_kw={"height_ratios": [2.2, 1.0]},
    )
    ax_loss.plot(its, [r["l_total"] for r in rows], label="total", lw=1.4)
    ax_loss.plot(its, [r["l_diff"] for r in rows], label="denoising", lw=1.0)
    if any(r["l_freq"] > 0 for r in rows):
        ax_loss.plot(its, [r["l_freq"] for r in rows], label="spectral", lw=1.0)
    ax_loss.set_yscale("log")
    ax_loss.set_ylabel("loss")
    ax_loss.legend(frameon=False, fontsize=9)
    ax_loss.grid(alpha=0.25)

    ax_sched.plot(its, [r["lr"] for r in rows], label="lr", lw=1.0)
    ax_sched.set_ylabel("lr")
    ax_sched.grid(alpha=0.25)
    twin = ax_sched.twinx()
    twin.plot(its, [r["gamma"] for r in rows], color="tab:orange",
              label="rich prob", lw=1.0)
    twin.set_ylabel("rich prob")
    twin.set_ylim(-0.05, 1.05)
    ax_sched.set_xlabel("iteration")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def save_confusion_figure(report: dict, path: str | Path) -> None:
    """Confusion-matrix heatmap for a single evaluation report."""
    matrix = np.asarray(report["confusion"], dtype=float)
    ids = report["candidates"]
    fig, ax = plt.subplots(figsize=(5.2, 4.6))
    im = ax.imshow(matrix, cmap="viridis")
    ax.set_xticks(range(len(ids)), [str(i) for i in ids], rotation=45)
    ax.set_yticks(range(len(ids)), [str(i) for i in ids])
    ax.set_xlabel("predicted class")
    ax.set_ylabel("true class")
    ax.set_title(f"accuracy {report['accuracy']:.3f} @ t={report['t_test']}")
    for i in range(matrix.shape[0]):
        for j in range(matrix.shape[1]):
            count = int(matrix[i, j])
            if count:
                ax.text(j, i, str(count), ha="center", va="center",
                        color="white", fontsize=8)
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def save_sweep_figure(report: dict, path: str | Path) -> None:
    """Accuracy as a function of the inference noise level."""
    sweep = report.get("sweep")
    if not sweep:
        raise ValueError("report carries no t sweep")
    ts = [s["t_test"] for s in sweep]
    acc = [s["accuracy"] for s in sweep]
    fig, ax = plt.subplots(figsize=(5.6, 3.8))
    ax.plot(ts, acc, marker="o", lw=1.4)
    ax.set_xlabel("inference timestep")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.grid(alpha=0.25)
    ax.axvline(report["best_t"], color="tab:red", ls="--", lw=0.9,
               label=f"best t={report['best_t']}")
    ax.legend(frameon=False, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def save_spectrum_figure(report: dict, path: str | Path) -> None:
    """Per-frequency band energy, ground truth vs one-step reconstruction."""
    freqs = report["freq_axis"]
    fig, ax = plt.subplots(figsize=(6.2, 4.0))
    ax.plot(freqs, report["gt"]["per_k"], label="ground truth", marker="o",
            ms=3.5, lw=1.2)
    ax.plot(freqs, report["pred"]["per_k"], label="reconstruction", marker="s",
            ms=3.5, lw=1.2)
    cutoff_frac = report["cutoff"] / report["length"]
    ax.axvline(cutoff_frac, color="gray", ls=":", lw=1.0, label="band cutoff")
    ax.set_yscale("log")
    ax.set_xlabel("normalised frequency k/L")
    ax.set_ylabel("band energy")
    ax.set_title(f"high-band gap {report['high_band_gap']:.4f} @ t={report['t_test']}")
    ax.legend(frameon=False, fontsize=9)
    ax.grid(alpha=0.25, which="both")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def save_ablation_figure(rows: list[dict], path: str | Path) -> None:
    """Bar chart of per-cell accuracy; failed cells are skipped."""
    ok = [r for r in rows if r["accuracy"] != ""]
    if not ok:
        raise ValueError("no successful ablation cells to plot")
    labels = [r["label"] for r in ok]
    acc = [float(r["accuracy"]) for r in ok]
    fig, ax = plt.subplots(figsize=(max(5.0, 1.1 * len(ok)), 3.8))
    bars = ax.bar(range(len(ok)), acc, color="tab:blue", width=0.62)
    ax.set_xticks(range(len(ok)), labels, rotation=30, ha="right")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.grid(alpha=0.25, axis="y")
    for bar, a in zip(bars, acc):
        ax.text(bar.get_x() + bar.get_width() / 2, a + 0.015, f"{a:.2f}",
                ha="center", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
