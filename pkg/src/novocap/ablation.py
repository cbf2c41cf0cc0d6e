"""Ablation grid: which ingredient buys how much held-out F1.

Five standard rows toggle the pretrained word vectors, language-model
pretraining, whether the visual head stays trainable during caption
training, and the auxiliary image/text objectives. All rows of one seed
share that seed for initialization and batch order, so row-to-row
differences come from the toggles alone.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .config import RunConfig
from .evaluation import MentionReport
from .pipeline import LoadedWorld, caption_images, evaluate_captions, train_model


@dataclass(frozen=True)
class AblationRow:
    name: str
    pretrained_embeddings: bool
    lm_pretrain: bool
    visual_mode: str      # "tuned" | "fixed"
    aux_objectives: bool


DEFAULT_ROWS = (
    AblationRow("vision-only", False, False, "tuned", True),
    AblationRow("lm-embed-no-aux", True, True, "tuned", False),
    AblationRow("fixed-vision-no-aux", True, True, "fixed", False),
    AblationRow("aux-no-pretrain", True, False, "tuned", True),
    AblationRow("full", True, True, "tuned", True),
)


@dataclass
class RowResult:
    row: AblationRow
    seed: int
    report: MentionReport

    @property
    def avg_f1(self) -> float:
        return self.report.average_f1


def row_config(base: RunConfig, row: AblationRow, seed: int) -> RunConfig:
    """Project a grid row onto a run configuration."""
    return replace(
        base,
        seed=seed,
        pretrained_embeddings=row.pretrained_embeddings,
        lm_pretrain_steps=base.lm_pretrain_steps if row.lm_pretrain else 0,
        visual_mode=row.visual_mode,
        alpha=base.alpha if row.aux_objectives else 0.0,
        beta=base.beta if row.aux_objectives else 0.0,
    )


def run_row(world: LoadedWorld, base: RunConfig, row: AblationRow, seed: int) -> RowResult:
    cfg = row_config(base, row, seed)
    result = train_model(world, cfg)
    rows = caption_images(result.model, world.test_images, "greedy", cfg.max_len)
    report = evaluate_captions(rows, world.test_truth(), set(world.heldout))
    return RowResult(row, seed, report)


def run_grid(world: LoadedWorld, base: RunConfig, rows=DEFAULT_ROWS,
             seeds=(1, 2, 3), progress=None) -> list[RowResult]:
    results = []
    for row in rows:
        for seed in seeds:
            if progress:
                progress(f"ablation row {row.name!r} seed {seed}")
            results.append(run_row(world, base, row, seed))
    return results


def grid_csv_rows(results: list[RowResult]) -> list[dict]:
    out = []
    for r in results:
        record = {"row": r.row.name, "seed": r.seed, "avg_f1": r.avg_f1,
                  "percent_described": r.report.percent_described,
                  "avg_accuracy": r.report.average_accuracy}
        for s in r.report.per_object:
            record[f"f1_{s.object}"] = s.f1
        out.append(record)
    return out


def grid_summary(results: list[RowResult]) -> dict[str, dict[int, float]]:
    """row name -> seed -> held-out average F1."""
    summary: dict[str, dict[int, float]] = {}
    for r in results:
        summary.setdefault(r.row.name, {})[r.seed] = r.avg_f1
    return summary


def format_grid_table(results: list[RowResult]) -> str:
    summary = grid_summary(results)
    seeds = sorted({r.seed for r in results})
    header = f"{'row':<22}" + "".join(f"{'seed ' + str(s):>10}" for s in seeds) + f"{'mean':>10}"
    lines = [header]
    for name, per_seed in summary.items():
        vals = [per_seed[s] for s in seeds if s in per_seed]
        cells = "".join(f"{per_seed.get(s, float('nan')):>10.4f}" for s in seeds)
        lines.append(f"{name:<22}{cells}{sum(vals) / len(vals):>10.4f}")
    return "\n".join(lines) + "\n"
