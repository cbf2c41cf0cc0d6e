"""End-to-end plumbing shared by the CLI commands and the ablation grid:
load a generated world from its manifest, build and train a model under a
RunConfig, caption test images, and score the captions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataio
from .checkpoint import Checkpoint, optimizer_state, restore_model
from .config import RunConfig
from .dataio import CaptionRow, ImageExample, PairedExample
from .decoding import beam_decode, greedy_decode, sample_rank_decode
from .errors import DataFileError
from .fusion import CaptionModel
from .training import (JointTrainer, LossBreakdown, Sources, TrainConfig,
                       pretrain_lm, pretrain_vision)
from .vocab import EmbeddingTable, Vocabulary


@dataclass
class LoadedWorld:
    root: Path
    manifest: dict
    vocab: Vocabulary
    heldout: list[str]
    train_paired: list[PairedExample]
    test_paired: list[PairedExample]
    test_images: list[ImageExample]
    image_only: list[ImageExample]
    text_only: list[list[str]]
    embeddings_path: Path

    @property
    def feature_dim(self) -> int:
        return int(self.manifest["feature_dim"])

    @property
    def embed_dim(self) -> int:
        return int(self.manifest["embed_dim"])

    def test_truth(self) -> dict[str, set[str]]:
        return {ex.image_id: set(ex.labels) for ex in self.test_images}


def load_world(manifest_path) -> LoadedWorld:
    manifest_path = Path(manifest_path)
    manifest = dataio.read_json(manifest_path)
    root = manifest_path.parent
    files = manifest["files"]

    def p(key) -> Path:
        return root / files[key]

    return LoadedWorld(
        root=root,
        manifest=manifest,
        vocab=dataio.read_vocab(p("vocab")),
        heldout=list(manifest["heldout"]),
        train_paired=dataio.read_paired(p("train_paired")),
        test_paired=dataio.read_paired(p("test_paired")),
        test_images=dataio.read_labeled_images(p("test_images")),
        image_only=dataio.read_labeled_images(p("image_only")),
        text_only=dataio.read_corpus(p("text_only")),
        embeddings_path=p("embeddings"),
    )


def build_model(world: LoadedWorld, cfg: RunConfig) -> CaptionModel:
    """Pretrained vectors load frozen (per cfg); the from-scratch baseline
    is always trainable, like a conventional captioner's embedding layer."""
    if cfg.pretrained_embeddings:
        table = EmbeddingTable.load(world.embeddings_path, world.vocab,
                                    frozen=cfg.freeze_embeddings, seed=cfg.seed)
    else:
        table = EmbeddingTable.random(world.vocab, world.embed_dim, seed=cfg.seed,
                                      frozen=False)
    return CaptionModel.build(world.vocab, table, cfg.hidden_size,
                              world.feature_dim, cfg.visual_hidden, cfg.seed)


@dataclass
class TrainResult:
    model: CaptionModel
    trainer: JointTrainer
    joint_log: list[LossBreakdown]
    lm_pretrain_log: list[float] = field(default_factory=list)
    vision_pretrain_log: list[float] = field(default_factory=list)


def train_model(world: LoadedWorld, cfg: RunConfig,
                resume: Checkpoint | None = None) -> TrainResult:
    """Optional vision/LM pretraining phases followed by joint training.

    Resuming skips the pretraining phases (their effect is already baked
    into the restored parameters) and continues the joint phase from the
    saved step with the saved optimizer moments.
    """
    tcfg = TrainConfig(steps=cfg.steps, alpha=cfg.alpha, beta=cfg.beta,
                       learning_rate=cfg.learning_rate, batch_size=cfg.batch_size,
                       image_batch_size=cfg.image_batch_size or None,
                       text_batch_size=cfg.text_batch_size or None,
                       seed=cfg.seed, clip_norm=cfg.clip_norm)
    sources = Sources.from_datasets(world.vocab, world.train_paired,
                                    world.image_only, world.text_only)

    if resume is not None:
        model = restore_model(resume)
        trainer = JointTrainer(model, sources, tcfg,
                               visual_mode=cfg.visual_mode,
                               start_step=resume.step,
                               opt_state=optimizer_state(resume))
        joint_log = trainer.run(cfg.steps)
        return TrainResult(model, trainer, joint_log)

    model = build_model(world, cfg)
    vision_log: list[float] = []
    lm_log: list[float] = []
    if cfg.vision_pretrain_steps > 0 and sources.image_only:
        vision_log = pretrain_vision(model, sources.image_only,
                                     cfg.vision_pretrain_steps, tcfg)
    if cfg.lm_pretrain_steps > 0 and sources.text_only:
        lm_log = pretrain_lm(model, sources.text_only, cfg.lm_pretrain_steps, tcfg)
    trainer = JointTrainer(model, sources, tcfg, visual_mode=cfg.visual_mode)
    joint_log = trainer.run(cfg.steps)
    return TrainResult(model, trainer, joint_log, lm_log, vision_log)


def parse_decode_method(method: str) -> tuple[str, int]:
    """'greedy' | 'beam:K' | 'sample:N' -> (kind, parameter)."""
    if method == "greedy":
        return "greedy", 1
    kind, _, arg = method.partition(":")
    if kind in ("beam", "sample") and arg.isdigit() and int(arg) >= 1:
        return kind, int(arg)
    raise ValueError(f"unknown decode method {method!r}; "
                     "expected greedy, beam:K, or sample:N")


def caption_images(model: CaptionModel, images: list[ImageExample], method: str,
                   max_len: int, seed: int = 0) -> list[CaptionRow]:
    kind, arg = parse_decode_method(method)
    rows = []
    for i, ex in enumerate(images):
        if kind == "greedy":
            result = greedy_decode(model, ex.features, max_len)
        elif kind == "beam":
            result = beam_decode(model, ex.features, arg, max_len)
        else:
            result = sample_rank_decode(model, ex.features, arg, max_len,
                                        seed=int(np.random.SeedSequence((seed, i))
                                                 .generate_state(1)[0]))
        rows.append(CaptionRow(ex.image_id, model.vocab.decode(result.tokens),
                               result.log_prob))
    return rows


def lm_perplexity(model: CaptionModel, sentences: list[list[str]]) -> float:
    """exp of the mean per-token negative log-likelihood (EOS included)."""
    import novocap.autodiff as ad

    total_nll = 0.0
    total_tokens = 0
    with ad.no_grad():
        for sent in sentences:
            ids = model.vocab.encode(sent)
            total_nll += float(model.lm.sentence_loss(ids).data)
            total_tokens += len(ids) + 1
    return math.exp(total_nll / total_tokens) if total_tokens else float("nan")


def evaluate_captions(rows: list[CaptionRow], truth: dict[str, set[str]],
                      objects: set[str], model: CaptionModel | None = None,
                      reference_sentences: list[list[str]] | None = None):
    from .evaluation import build_report

    captions = {r.image_id: r.tokens for r in rows}
    unknown = set(captions) - set(truth)
    if unknown:
        raise DataFileError(f"caption ids not in the test set: {sorted(unknown)[:5]}")
    ppl = None
    if model is not None and reference_sentences:
        ppl = lm_perplexity(model, reference_sentences)
    return build_report(captions, truth, objects, lm_perplexity=ppl)
