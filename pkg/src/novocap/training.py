"""Optimization: Adam, deterministic batch scheduling, the pretraining
phases, and the joint three-source training loop.

Batch order is a pure function of (seed, source, step): each source cycles
through its own per-epoch permutation drawn from a SeedSequence keyed on
the epoch number. That keeps every run replayable and lets a resumed run
continue bit-identically from nothing more than the step counter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .fusion import CaptionModel

PAIRED_STREAM, IMAGE_STREAM, TEXT_STREAM = 1, 2, 3


@dataclass
class TrainConfig:
    steps: int = 400
    alpha: float = 1.0          # weight of the image objective
    beta: float = 1.0           # weight of the text objective
    learning_rate: float = 1e-3
    batch_size: int = 8         # paired batch; per-source overrides below
    image_batch_size: int | None = None
    text_batch_size: int | None = None
    seed: int = 0
    clip_norm: float = 5.0

    def batch_for(self, source: str) -> int:
        if source == "image" and self.image_batch_size is not None:
            return self.image_batch_size
        if source == "text" and self.text_batch_size is not None:
            return self.text_batch_size
        return self.batch_size


@dataclass
class LossBreakdown:
    l_cm: float
    l_im: float
    l_lm: float
    total: float


class Adam:
    """Adam with optional global-norm gradient clipping.

    Parameters without a gradient this step are treated as zero-gradient;
    their moments still decay, so resumed and uninterrupted runs agree.
    """

    def __init__(self, named_params: list[tuple[str, Tensor]], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(named_params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params}

    def step(self, clip_norm: float | None = None) -> None:
        if clip_norm:
            norm = ad.global_grad_norm(p for _, p in self.params)
            if norm > clip_norm:
                factor = clip_norm / norm
                for _, p in self.params:
                    if p.grad is not None:
                        p.grad *= factor
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params:
            g = p.grad if p.grad is not None else 0.0
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (self.m[name] / c1) / (np.sqrt(self.v[name] / c2) + self.eps)
            p.grad = None

    def state_dict(self) -> dict:
        return {"t": self.t,
                "m": {k: v.copy() for k, v in self.m.items()},
                "v": {k: v.copy() for k, v in self.v.items()}}

    def load_state_dict(self, state: dict) -> None:
        self.t = int(state["t"])
        for name, _ in self.params:
            self.m[name] = np.array(state["m"][name], dtype=np.float64)
            self.v[name] = np.array(state["v"][name], dtype=np.float64)


class SourceSampler:
    """Per-source index scheduler: epoch e uses the permutation seeded by
    (seed, stream, e); batch for step t covers absolute positions
    [t*B, (t+1)*B), crossing epoch boundaries transparently."""

    def __init__(self, n: int, batch_size: int, seed: int, stream: int):
        self.n = n
        self.batch_size = batch_size
        self.seed = seed
        self.stream = stream
        self._perms: dict[int, np.ndarray] = {}

    def _perm(self, epoch: int) -> np.ndarray:
        if epoch not in self._perms:
            ss = np.random.SeedSequence((self.seed, self.stream, epoch))
            self._perms[epoch] = np.random.default_rng(ss).permutation(self.n)
            for old in [e for e in self._perms if e < epoch - 1]:
                del self._perms[old]
        return self._perms[epoch]

    def batch(self, step: int) -> list[int]:
        start = step * self.batch_size
        return [int(self._perm((start + j) // self.n)[(start + j) % self.n])
                for j in range(self.batch_size)]

    def epoch_of(self, step: int) -> int:
        return (step * self.batch_size) // self.n


def _mean_loss(losses: list[Tensor]) -> Tensor:
    total = losses[0]
    for loss in losses[1:]:
        total = total + loss
    return total * (1.0 / len(losses))


def pretrain_lm(model: CaptionModel, sentences: list[list[int]], steps: int,
                cfg: TrainConfig) -> list[float]:
    """Minibatch descent on the mean sentence loss; returns per-epoch means."""
    if not sentences:
        raise ValueError("text corpus must be non-empty")
    opt = Adam(model.lm.named_parameters()
               + ([("embeddings.matrix", model.table.matrix)] if not model.table.frozen else []),
               lr=cfg.learning_rate)
    sampler = SourceSampler(len(sentences), cfg.batch_size, cfg.seed, TEXT_STREAM)
    return _pretrain_loop(steps, sampler,
                          lambda idx: model.lm.sentence_loss(sentences[idx]),
                          opt, cfg)


def pretrain_vision(model: CaptionModel, images: list[tuple[np.ndarray, set[int]]],
                    steps: int, cfg: TrainConfig) -> list[float]:
    """Minibatch descent on the mean multi-label image loss."""
    if not images:
        raise ValueError("image set must be non-empty")
    opt = Adam(model.vision.named_parameters(), lr=cfg.learning_rate)
    sampler = SourceSampler(len(images), cfg.batch_size, cfg.seed, IMAGE_STREAM)
    return _pretrain_loop(steps, sampler,
                          lambda idx: model.vision.loss(*images[idx]),
                          opt, cfg)


def _pretrain_loop(steps, sampler, loss_of_index, opt, cfg) -> list[float]:
    epoch_losses: list[list[float]] = []
    for t in range(steps):
        batch = sampler.batch(t)
        loss = _mean_loss([loss_of_index(i) for i in batch])
        loss.backward()
        opt.step(clip_norm=cfg.clip_norm)
        epoch = sampler.epoch_of(t)
        while len(epoch_losses) <= epoch:
            epoch_losses.append([])
        epoch_losses[epoch].append(float(loss.data))
    return [sum(chunk) / len(chunk) for chunk in epoch_losses if chunk]


def joint_step(model: CaptionModel,
               paired_batch: list[tuple[np.ndarray, list[int]]],
               image_batch: list[tuple[np.ndarray, set[int]]],
               text_batch: list[list[int]],
               cfg: TrainConfig, opt: Adam) -> LossBreakdown:
    """One combined update: total = mean caption loss + alpha * mean image
    loss + beta * mean text loss, a single backward pass, one Adam step.

    Every non-empty source's loss is evaluated and reported, but a term
    weighted zero is left out of the optimized total, so its gradient never
    reaches the shared parameters.
    """
    if not (paired_batch or image_batch or text_batch):
        raise ValueError("joint_step needs at least one non-empty batch")

    l_cm = _mean_loss([model.caption_loss(f, ids) for f, ids in paired_batch]) \
        if paired_batch else None
    l_im = _mean_loss([model.vision.loss(f, ids) for f, ids in image_batch]) \
        if image_batch else None
    l_lm = _mean_loss([model.lm.sentence_loss(ids) for ids in text_batch]) \
        if text_batch else None

    total = None
    for term, weight in ((l_cm, 1.0), (l_im, cfg.alpha), (l_lm, cfg.beta)):
        if term is None or weight == 0.0:
            continue
        piece = term if weight == 1.0 else term * weight
        total = piece if total is None else total + piece

    breakdown = LossBreakdown(
        l_cm=float(l_cm.data) if l_cm is not None else 0.0,
        l_im=float(l_im.data) if l_im is not None else 0.0,
        l_lm=float(l_lm.data) if l_lm is not None else 0.0,
        total=float(total.data) if total is not None else 0.0,
    )
    if total is not None:
        total.backward()
        opt.step(clip_norm=cfg.clip_norm)
    return breakdown


@dataclass
class Sources:
    """The three training sources, already encoded to ids/feature arrays."""
    paired: list[tuple[np.ndarray, list[int]]] = field(default_factory=list)
    image_only: list[tuple[np.ndarray, set[int]]] = field(default_factory=list)
    text_only: list[list[int]] = field(default_factory=list)

    @classmethod
    def from_datasets(cls, vocab, paired, image_only, text_only) -> "Sources":
        return cls(
            paired=[(ex.features, vocab.encode(ex.caption)) for ex in paired],
            image_only=[(ex.features, ex.label_ids(vocab)) for ex in image_only],
            text_only=[vocab.encode(s) for s in text_only],
        )


class JointTrainer:
    """Runs joint_step over independently cycling sources.

    visual_mode="fixed" removes the visual head from the update (its
    tensors stop requiring gradients), mirroring a frozen pre-trained
    classifier under caption training.
    """

    def __init__(self, model: CaptionModel, sources: Sources, cfg: TrainConfig,
                 visual_mode: str = "tuned", start_step: int = 0,
                 opt_state: dict | None = None):
        if not sources.paired:
            raise ValueError("paired source must be non-empty")
        if visual_mode not in ("tuned", "fixed"):
            raise ValueError(f"visual_mode must be 'tuned' or 'fixed', got {visual_mode!r}")
        self.model = model
        self.sources = sources
        self.cfg = cfg
        self.visual_mode = visual_mode
        self.step_count = start_step
        if visual_mode == "fixed":
            for _, p in model.vision.named_parameters():
                p.requires_grad = False
        self.opt = Adam(model.trainable_parameters(), lr=cfg.learning_rate)
        if opt_state is not None:
            self.opt.load_state_dict(opt_state)
        self._paired = SourceSampler(len(sources.paired), cfg.batch_for("paired"),
                                     cfg.seed, PAIRED_STREAM)
        self._image = SourceSampler(len(sources.image_only), cfg.batch_for("image"),
                                    cfg.seed, IMAGE_STREAM) if sources.image_only else None
        self._text = SourceSampler(len(sources.text_only), cfg.batch_for("text"),
                                   cfg.seed, TEXT_STREAM) if sources.text_only else None

    def run_step(self) -> LossBreakdown:
        t = self.step_count
        paired = [self.sources.paired[i] for i in self._paired.batch(t)]
        images = [self.sources.image_only[i] for i in self._image.batch(t)] \
            if self._image else []
        texts = [self.sources.text_only[i] for i in self._text.batch(t)] \
            if self._text else []
        breakdown = joint_step(self.model, paired, images, texts, self.cfg, self.opt)
        self.step_count += 1
        return breakdown

    def run(self, steps: int) -> list[LossBreakdown]:
        return [self.run_step() for _ in range(steps)]
