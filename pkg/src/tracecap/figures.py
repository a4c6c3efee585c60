"""Figure rendering for the CLI report paths.

Each renderer writes one image file next to the delimited output; the
delimited output stays authoritative, figures are a convenience view.
Uses the non-interactive backend so rendering works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import Histogram2D, RichnessReport


def render_histogram_figure(hist: Histogram2D, path: str) -> None:
    """Heatmap of the localization histogram with the unit box outlined."""
    fig, ax = plt.subplots(figsize=(6, 6))
    extent = (*hist.x_range, *hist.y_range)
    ax.imshow(
        hist.bins,
        origin="lower",
        extent=extent,
        cmap="viridis",
        interpolation="nearest",
        aspect="equal",
    )
    # The mentioned box spans [-1,1] in its own frame.
    ax.add_patch(
        plt.Rectangle((-1, -1), 2, 2, fill=False, edgecolor="white", linewidth=1.2)
    )
    ax.set_xlabel("box-relative x")
    ax.set_ylabel("box-relative y")
    ax.set_title(f"trace points near mentioned boxes (n={hist.total})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_richness_figure(
    report: RichnessReport, nouns_hist: dict[int, int], path: str
) -> None:
    """Bar chart of per-caption means plus the nouns-per-caption distribution."""
    fig, (ax_means, ax_nouns) = plt.subplots(1, 2, figsize=(10, 4))
    names = ["words", "nouns", "pronouns", "adjectives", "adpositions", "verbs"]
    values = [
        report.mean_words,
        report.mean_nouns,
        report.mean_pronouns,
        report.mean_adjectives,
        report.mean_adpositions,
        report.mean_verbs,
    ]
    ax_means.bar(names, values, color="tab:blue")
    ax_means.set_ylabel("mean per caption")
    ax_means.set_title(f"richness over {report.captions} captions")
    ax_means.tick_params(axis="x", rotation=30)

    if nouns_hist:
        counts = np.arange(min(nouns_hist), max(nouns_hist) + 1)
        ax_nouns.bar(counts, [nouns_hist.get(int(c), 0) for c in counts], color="tab:orange")
    ax_nouns.set_xlabel("nouns per caption")
    ax_nouns.set_ylabel("captions")
    ax_nouns.set_title("nouns per caption")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_eval_figure(rows: list[dict], path: str) -> None:
    """Per-metric score distributions for an evaluation run."""
    metrics = ("rouge_l", "rouge_1_f1", "bleu1", "bleu4")
    fig, axes = plt.subplots(1, len(metrics), figsize=(4 * len(metrics), 3.2))
    for ax, metric in zip(axes, metrics):
        scores = [row[metric] for row in rows]
        ax.hist(scores, bins=20, range=(0.0, 1.0), color="tab:green")
        ax.set_title(metric)
        ax.set_xlabel("score")
    axes[0].set_ylabel("images")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
