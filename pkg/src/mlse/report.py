"""Human-readable reports: error-matrix grids, top-k listings, and
figure rendering (heatmaps, training curves) next to the delimited
output files.
"""
from __future__ import annotations

import numpy as np

from .simsearch import ErrorMatrix, average_error


def format_error_matrix(matrix: ErrorMatrix, percent: bool = True) -> str:
    """Tab-separated L x L grid, row language first, "-" diagonal.

    An "All" column/row holds the mean over each row's / column's
    ordered pairs; the corner cell is the overall average.
    """
    langs = matrix.languages
    scale = 100.0 if percent else 1.0
    fmt = "{:.2f}" if percent else "{:.4f}"

    def cell(value) -> str:
        return fmt.format(value * scale)

    lines = ["\t".join(["src/tgt", *langs, "All"])]
    for i, p in enumerate(langs):
        row = [p]
        for j, q in enumerate(langs):
            row.append("-" if i == j else cell(matrix.errors[i, j]))
        row.append(cell(np.nanmean(matrix.errors[i])))
        lines.append("\t".join(row))
    bottom = ["All"]
    for j in range(len(langs)):
        bottom.append(cell(np.nanmean(matrix.errors[:, j])))
    bottom.append(cell(average_error(matrix)))
    lines.append("\t".join(bottom))
    return "\n".join(lines) + "\n"


def format_topk(results, texts=None) -> str:
    """One line per hit: rank, index, similarity (4 decimals), text."""
    lines = []
    for rank, (idx, sim) in enumerate(results, start=1):
        cols = [str(rank), str(idx), f"{sim:.4f}"]
        if texts is not None:
            cols.append(texts[idx])
        lines.append("\t".join(cols))
    return "\n".join(lines) + "\n"


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


# Deterministic PNG output: no creation-date metadata.
_PNG_META = {"Software": "mlse"}


def save_error_heatmap(matrix: ErrorMatrix, path):
    """Render the error matrix as an annotated percentage heatmap."""
    plt = _pyplot()
    langs = matrix.languages
    values = matrix.errors * 100.0
    fig, ax = plt.subplots(figsize=(1.2 * len(langs) + 2, 1.0 * len(langs) + 1.5))
    shown = np.ma.masked_invalid(values)
    im = ax.imshow(shown, cmap="viridis")
    ax.set_xticks(range(len(langs)), labels=langs)
    ax.set_yticks(range(len(langs)), labels=langs)
    ax.set_xlabel("target language")
    ax.set_ylabel("source language")
    for i in range(len(langs)):
        for j in range(len(langs)):
            label = "-" if i == j else f"{values[i, j]:.2f}"
            ax.text(j, i, label, ha="center", va="center", color="white", fontsize=9)
    fig.colorbar(im, ax=ax, label="similarity-search error (%)")
    ax.set_title("pairwise similarity-search error")
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)


def save_training_curves(records, path):
    """Plot train loss, per-decoder dev perplexity, and dev error."""
    plt = _pyplot()
    epochs = [r.epoch for r in records]
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))
    axes[0].plot(epochs, [r.train_loss for r in records], marker="o")
    axes[0].set_title("train loss")
    axes[0].set_xlabel("epoch")
    langs = sorted({q for r in records for q in r.dev_ppl})
    for q in langs:
        axes[1].plot(
            epochs,
            [r.dev_ppl.get(q, float("nan")) for r in records],
            marker="o",
            label=q,
        )
    axes[1].set_title("dev perplexity")
    axes[1].set_xlabel("epoch")
    if langs:
        axes[1].legend(fontsize=8)
    sim = [(r.epoch, r.dev_sim_error) for r in records if r.dev_sim_error is not None]
    if sim:
        axes[2].plot([e for e, _ in sim], [100.0 * v for _, v in sim], marker="o")
    axes[2].set_title("dev similarity error (%)")
    axes[2].set_xlabel("epoch")
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)
