"""Caption model: language and vision scores fused by elementwise sum.

The caption path owns no parameters of its own. It reads the same LSTM the
text objective trains and the same visual head the image objective trains,
so one gradient step moves all three objectives' view of the world at once.
The visual activations act as a per-image constant bias over the vocabulary
added at every timestep before the softmax.
"""

from __future__ import annotations

import copy

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .lm import LmState, LstmLm
from .vocab import BOS_ID, EOS_ID, EmbeddingTable, Vocabulary
from .vision import VisionHead


class CaptionModel:
    def __init__(self, vocab: Vocabulary, table: EmbeddingTable, lm: LstmLm,
                 vision: VisionHead):
        assert lm.table is table, "language model must share the embedding table"
        self.vocab = vocab
        self.table = table
        self.lm = lm
        self.vision = vision

    @classmethod
    def build(cls, vocab: Vocabulary, table: EmbeddingTable, hidden_size: int,
              feature_dim: int, visual_hidden: int, seed: int) -> "CaptionModel":
        rng = np.random.default_rng(seed)
        lm = LstmLm(table, hidden_size, rng)
        vision = VisionHead(feature_dim, visual_hidden, len(vocab), rng)
        return cls(vocab, table, lm, vision)

    def copy(self) -> "CaptionModel":
        """Independent deep copy (used to branch training histories)."""
        return copy.deepcopy(self)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        """All parameter tensors, embeddings included, in checkpoint order."""
        return ([("embeddings.matrix", self.table.matrix)]
                + self.lm.named_parameters() + self.vision.named_parameters())

    def trainable_parameters(self) -> list[tuple[str, Tensor]]:
        return [(n, p) for n, p in self.named_parameters() if p.requires_grad]

    def fused_step(self, state: LmState, prev_id: int, f_im: Tensor) -> tuple[LmState, Tensor]:
        """Advance the LSTM one token and return the summed activations."""
        state, f_lm = self.lm.step(state, prev_id)
        return state, f_lm + f_im

    def fused_distribution(self, state: LmState, prev_id: int,
                           f_im: Tensor) -> tuple[LmState, Tensor]:
        """Next-word distribution softmax(f_lm + f_im). With f_im all zero
        this is exactly the standalone language model's distribution."""
        state, f_cm = self.fused_step(state, prev_id, f_im)
        return state, ad.softmax(f_cm)

    def caption_loss(self, features: np.ndarray, token_ids: list[int]) -> Tensor:
        """Teacher-forced negative log-likelihood of a caption given image
        features; the image term enters at every timestep, the first one
        included. BOS/EOS handling matches LstmLm.sentence_loss."""
        if not token_ids:
            raise ValueError("caption must be non-empty")
        f_im = self.vision.activations(features)
        state = self.lm.init_state()
        total = None
        for inp, tgt in zip([BOS_ID] + list(token_ids), list(token_ids) + [EOS_ID]):
            state, f_cm = self.fused_step(state, inp, f_im)
            nll = -ad.log(ad.pick(ad.softmax(f_cm), tgt))
            total = nll if total is None else total + nll
        return total
