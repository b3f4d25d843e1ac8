"""Static figure rendering for results files.

Figures land next to the CSV/JSON they visualize.  PNGs are saved without
software metadata so identical runs produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_CL_COLOR = "#1f77b4"  # quality-ranked pruning
_RAND_COLOR = "#e6b422"  # size-matched random removal


def _save(fig, path):
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_ablation(points, path, title: str = "Pruning ablation") -> None:
    """Accuracy vs pruning ratio: quality-ranked arm vs random arm, gap shaded."""
    ratios = [p.ratio for p in points]
    cl = [p.mean_cl for p in points]
    rand = [p.mean_random for p in points]
    cl_sd = [p.sd_cl for p in points]
    rand_sd = [p.sd_random for p in points]

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.fill_between(ratios, rand, cl, color="0.85", zorder=0)
    ax.errorbar(ratios, cl, yerr=cl_sd, color=_CL_COLOR, marker="o", capsize=3,
                label="quality-ranked pruning")
    ax.errorbar(ratios, rand, yerr=rand_sd, color=_RAND_COLOR, marker="s", capsize=3,
                label="random removal")
    ax.set_xlabel("pruning ratio")
    ax.set_ylabel("test accuracy")
    ax.set_title(title)
    ax.legend(loc="best")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_training_curve(records, path, title: str = "Training") -> None:
    epochs = [r.epoch for r in records]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, [r.loss for r in records], color=_CL_COLOR, label="loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("weighted cross-entropy", color=_CL_COLOR)
    ax2 = ax.twinx()
    ax2.plot(epochs, [r.train_acc for r in records], color=_RAND_COLOR, label="train accuracy")
    ax2.set_ylabel("train accuracy", color=_RAND_COLOR)
    ax2.set_ylim(0, 1.02)
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def plot_report(rows, path, title: str = "Accuracy by mode") -> None:
    """Grouped bars: one group per dataset, one bar per training mode."""
    modes = ["baseline", "emo_p", "emo_r"]
    colors = {"baseline": "0.6", "emo_p": _CL_COLOR, "emo_r": _RAND_COLOR}
    names = [row["dataset"] for row in rows]
    width = 0.8 / len(modes)

    fig, ax = plt.subplots(figsize=(max(6, 1.8 * len(rows) + 2), 4))
    for k, mode in enumerate(modes):
        xs, ys = [], []
        for i, row in enumerate(rows):
            acc = row.get(f"{mode}_accuracy")
            if acc is not None:
                xs.append(i + (k - 1) * width)
                ys.append(acc)
        if xs:
            ax.bar(xs, ys, width=width, color=colors[mode], label=mode)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=15, ha="right")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.02)
    ax.set_title(title)
    ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, path)
