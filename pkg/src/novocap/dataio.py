"""Dataset record types and the text file formats that move them around.

All files are UTF-8 with '.'-decimal floats written via repr, so a seeded
generation run produces byte-identical files every time:

- corpus:        one whitespace-pretokenized lowercase sentence per line
- labeled image: "id<TAB>label1,label2,...<TAB>f1 f2 ... fF"
- paired:        "id<TAB>caption tokens<TAB>f1 f2 ... fF"
- captions:      "id<TAB>caption tokens<TAB>log_prob"
- vocab:         one token per line, in id order, reserved tokens first
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFileError
from .vocab import Vocabulary


@dataclass
class ImageExample:
    image_id: str
    labels: set[str]
    features: np.ndarray

    def label_ids(self, vocab: Vocabulary) -> set[int]:
        return {vocab.id(t) for t in self.labels}


@dataclass
class PairedExample:
    image_id: str
    caption: list[str] = field(default_factory=list)
    features: np.ndarray | None = None


@dataclass
class CaptionRow:
    image_id: str
    tokens: list[str]
    log_prob: float


def _fmt_floats(values: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in values)


def _parse_floats(text: str, path, lineno: int) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split()], dtype=np.float64)
    except ValueError:
        raise DataFileError(f"{path}:{lineno}: non-numeric feature value") from None


def _split_record(line: str, n_fields: int, path, lineno: int) -> list[str]:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != n_fields:
        raise DataFileError(f"{path}:{lineno}: expected {n_fields} tab-separated fields, "
                            f"found {len(parts)}")
    return parts


# -- corpus ------------------------------------------------------------------

def write_corpus(path, sentences: list[list[str]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sent in sentences:
            fh.write(" ".join(sent) + "\n")


def read_corpus(path) -> list[list[str]]:
    sentences = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            toks = line.split()
            if toks:
                sentences.append(toks)
    return sentences


# -- labeled images -----------------------------------------------------------

def write_labeled_images(path, examples: list[ImageExample]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            labels = ",".join(sorted(ex.labels))
            fh.write(f"{ex.image_id}\t{labels}\t{_fmt_floats(ex.features)}\n")


def read_labeled_images(path) -> list[ImageExample]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            image_id, labels, feats = _split_record(line, 3, path, lineno)
            label_set = {t for t in labels.split(",") if t}
            out.append(ImageExample(image_id, label_set, _parse_floats(feats, path, lineno)))
    return out


# -- paired image-caption ------------------------------------------------------

def write_paired(path, examples: list[PairedExample]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(f"{ex.image_id}\t{' '.join(ex.caption)}\t{_fmt_floats(ex.features)}\n")


def read_paired(path) -> list[PairedExample]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            image_id, caption, feats = _split_record(line, 3, path, lineno)
            out.append(PairedExample(image_id, caption.split(), _parse_floats(feats, path, lineno)))
    return out


# -- generated captions --------------------------------------------------------

def write_captions(path, rows: list[CaptionRow]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(f"{r.image_id}\t{' '.join(r.tokens)}\t{repr(r.log_prob)}\n")


def read_captions(path) -> list[CaptionRow]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            image_id, caption, lp = _split_record(line, 3, path, lineno)
            try:
                log_prob = float(lp)
            except ValueError:
                raise DataFileError(f"{path}:{lineno}: bad log_prob {lp!r}") from None
            out.append(CaptionRow(image_id, caption.split(), log_prob))
    return out


# -- vocabulary ----------------------------------------------------------------

def write_vocab(path, vocab: Vocabulary) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tok in vocab.tokens:
            fh.write(tok + "\n")


def read_vocab(path) -> Vocabulary:
    with open(path, "r", encoding="utf-8") as fh:
        tokens = [line.strip() for line in fh if line.strip()]
    return Vocabulary.from_tokens(tokens)


# -- manifests -------------------------------------------------------------------

def write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
