"""Object-mention metrics over generated captions.

A mention is an exact (lowercased) token match anywhere in a caption, and
it is boolean per image: repeats do not count twice. For one object over a
set of truth-labeled images:

- precision: among images whose caption mentions it, fraction that contain it
- recall:    among images that contain it, fraction whose caption mentions it
- f1:        harmonic mean, 0 when both are 0
- accuracy:  identical to recall, reported per category and macro-averaged
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .dataio import read_json, write_json


@dataclass
class ObjectScore:
    object: str
    precision: float
    recall: float
    f1: float
    n_images: int


@dataclass
class MentionReport:
    per_object: list[ObjectScore]
    average_f1: float
    percent_described: float
    average_accuracy: float
    lm_perplexity: float | None = None


def _check_ids(captions: Mapping[str, Sequence[str]], truth: Mapping[str, set]) -> None:
    stray = set(captions) - set(truth)
    if stray:
        raise ValueError(f"caption ids missing from truth: {sorted(stray)[:5]}")


def _counts(captions: Mapping[str, Sequence[str]], truth: Mapping[str, set],
            obj: str) -> tuple[int, int, int]:
    _check_ids(captions, truth)
    contains = {i for i, objs in truth.items() if obj in objs}
    if not contains:
        raise KeyError(f"object {obj!r} not present in any truth image")
    mentions = {i for i, toks in captions.items()
                if any(t.lower() == obj for t in toks)}
    return len(mentions & contains), len(mentions), len(contains)


def object_f1(captions: Mapping[str, Sequence[str]], truth: Mapping[str, set],
              obj: str) -> tuple[float, float, float]:
    """(precision, recall, f1); precision is 0 when the object is never
    mentioned, f1 is 0 when precision + recall is 0."""
    tp, n_mentions, n_contains = _counts(captions, truth, obj)
    p = tp / n_mentions if n_mentions else 0.0
    r = tp / n_contains
    f1 = 2.0 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


def percent_described(captions: Mapping[str, Sequence[str]], truth: Mapping[str, set],
                      objects: set[str]) -> float:
    """Fraction of objects correctly mentioned in at least one caption of an
    image that contains them."""
    if not objects:
        raise ValueError("objects set must be non-empty")
    described = 0
    for obj in objects:
        tp, _, _ = _counts(captions, truth, obj)
        if tp >= 1:
            described += 1
    return described / len(objects)


def category_accuracy(captions: Mapping[str, Sequence[str]], truth: Mapping[str, set],
                      obj: str) -> float:
    """Fraction of images containing the object whose caption mentions it."""
    try:
        tp, _, n_contains = _counts(captions, truth, obj)
    except KeyError:
        raise ValueError(f"no image contains object {obj!r}") from None
    return tp / n_contains


def build_report(captions: Mapping[str, Sequence[str]], truth: Mapping[str, set],
                 objects: set[str], lm_perplexity: float | None = None) -> MentionReport:
    if not objects:
        raise ValueError("objects set must be non-empty")
    per_object = []
    for obj in sorted(objects):
        tp, n_mentions, n_contains = _counts(captions, truth, obj)
        p = tp / n_mentions if n_mentions else 0.0
        r = tp / n_contains
        f1 = 2.0 * p * r / (p + r) if p + r else 0.0
        per_object.append(ObjectScore(obj, p, r, f1, n_contains))
    n = len(per_object)
    return MentionReport(
        per_object=per_object,
        average_f1=sum(s.f1 for s in per_object) / n,
        percent_described=sum(1 for s in per_object if s.recall > 0) / n,
        average_accuracy=sum(s.recall for s in per_object) / n,
        lm_perplexity=lm_perplexity,
    )


# -- emission -----------------------------------------------------------------

def format_table(report: MentionReport) -> str:
    """Aligned text table: one row per object plus the aggregate rows."""
    header = f"{'object':<16}{'precision':>10}{'recall':>10}{'f1':>10}{'images':>8}"
    lines = [header]
    for s in report.per_object:
        lines.append(f"{s.object:<16}{s.precision:>10.4f}{s.recall:>10.4f}"
                     f"{s.f1:>10.4f}{s.n_images:>8d}")
    lines.append(f"{'average_f1':<16}{report.average_f1:>10.4f}")
    lines.append(f"{'pct_described':<16}{report.percent_described:>10.4f}")
    lines.append(f"{'avg_accuracy':<16}{report.average_accuracy:>10.4f}")
    if report.lm_perplexity is not None:
        lines.append(f"{'lm_perplexity':<16}{report.lm_perplexity:>10.4f}")
    return "\n".join(lines) + "\n"


def report_to_dict(report: MentionReport) -> dict:
    return {
        "per_object": [{"object": s.object, "precision": s.precision, "recall": s.recall,
                        "f1": s.f1, "n_images": s.n_images} for s in report.per_object],
        "average_f1": report.average_f1,
        "percent_described": report.percent_described,
        "average_accuracy": report.average_accuracy,
        "lm_perplexity": report.lm_perplexity,
    }


def report_from_dict(d: dict) -> MentionReport:
    return MentionReport(
        per_object=[ObjectScore(s["object"], s["precision"], s["recall"], s["f1"],
                                s["n_images"]) for s in d["per_object"]],
        average_f1=d["average_f1"],
        percent_described=d["percent_described"],
        average_accuracy=d["average_accuracy"],
        lm_perplexity=d.get("lm_perplexity"),
    )


def emit_report(report: MentionReport, json_path, table_path) -> None:
    """Machine-readable JSON next to the aligned text table."""
    write_json(json_path, report_to_dict(report))
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write(format_table(report))


def load_report(json_path) -> MentionReport:
    return report_from_dict(read_json(json_path))
