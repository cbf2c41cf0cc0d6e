"""Figure rendering for the report paths.

Every CLI command that writes delimited output (training logs, evaluation
reports, ablation tables) drops a PNG next to it via these helpers. Uses
the Agg backend so rendering works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .evaluation import MentionReport  # noqa: E402
from .training import LossBreakdown  # noqa: E402


def save_loss_curves(joint_log: list[LossBreakdown], path,
                     lm_pretrain: list[float] | None = None,
                     vision_pretrain: list[float] | None = None) -> None:
    """Joint-phase loss components per step; pretraining phases, when they
    ran, get a second panel over epochs."""
    pre = [(name, values) for name, values in
           (("lm pretrain", lm_pretrain), ("vision pretrain", vision_pretrain)) if values]
    fig, axes = plt.subplots(1, 2 if pre else 1, figsize=(10 if pre else 6, 4))
    ax = axes[0] if pre else axes
    steps = range(len(joint_log))
    ax.plot(steps, [b.total for b in joint_log], label="total", color="black", lw=1.5)
    ax.plot(steps, [b.l_cm for b in joint_log], label="caption", lw=1.0)
    ax.plot(steps, [b.l_im for b in joint_log], label="image", lw=1.0)
    ax.plot(steps, [b.l_lm for b in joint_log], label="text", lw=1.0)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_title("joint training")
    ax.legend(loc="best", fontsize=8)
    if pre:
        ax2 = axes[1]
        for name, values in pre:
            ax2.plot(range(len(values)), values, marker="o", ms=3, label=name)
        ax2.set_xlabel("epoch")
        ax2.set_ylabel("mean loss")
        ax2.set_title("pretraining")
        ax2.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_f1_bars(report: MentionReport, path, heldout: set[str] | None = None) -> None:
    """Horizontal per-object F1 bars; held-out objects drawn darker."""
    heldout = heldout or set()
    objs = [s.object for s in report.per_object]
    scores = [s.f1 for s in report.per_object]
    colors = ["#2f5d8a" if o in heldout else "#8fb4d9" for o in objs]
    fig, ax = plt.subplots(figsize=(6, max(2.5, 0.35 * len(objs))))
    ax.barh(range(len(objs)), scores, color=colors)
    ax.set_yticks(range(len(objs)))
    ax.set_yticklabels(objs)
    ax.invert_yaxis()
    ax.set_xlim(0, 1)
    ax.set_xlabel("mention F1")
    ax.axvline(report.average_f1, color="black", ls="--", lw=1,
               label=f"average {report.average_f1:.3f}")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_ablation_bars(results: dict[str, dict[int, float]], path) -> None:
    """Grouped bars: held-out average F1 per configuration row and seed."""
    rows = list(results)
    seeds = sorted({s for per_seed in results.values() for s in per_seed})
    width = 0.8 / max(1, len(seeds))
    fig, ax = plt.subplots(figsize=(1.6 * len(rows) + 2, 4))
    for j, seed in enumerate(seeds):
        xs = [i + j * width for i in range(len(rows))]
        ys = [results[r].get(seed, 0.0) for r in rows]
        ax.bar(xs, ys, width=width, label=f"seed {seed}")
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(rows))])
    ax.set_xticklabels(rows, rotation=20, ha="right")
    ax.set_ylim(0, 1)
    ax.set_ylabel("held-out average F1")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
