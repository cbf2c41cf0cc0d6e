"""LSTM language model over the shared embedding table.

One recurrent layer with packed gates, a linear map back to embedding
space, and the tied output projection. Sentence likelihoods are always
teacher-forced; free-running generation lives in the decoding module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .vocab import BOS_ID, EOS_ID, EmbeddingTable

# gate order inside the packed weight/bias blocks
_GATES = ("input", "forget", "output", "cell")


@dataclass
class LmState:
    hidden: ad.Tensor
    cell: ad.Tensor


class LstmLm:
    """Single-layer LSTM: embed -> lstm -> linear(H->d) -> tied projection."""

    def __init__(self, table: EmbeddingTable, hidden_size: int, rng: np.random.Generator):
        d = table.dim
        h = hidden_size
        self.table = table
        self.hidden_size = h
        # packed gates, order (input, forget, output, cell); weights uniform
        # in [-0.08, 0.08], forget-gate bias pinned to 1.0 for stable memory
        self.w_x = ad.parameter((4 * h, d), rng)
        self.w_h = ad.parameter((4 * h, h), rng)
        self.b = ad.parameter((4 * h,), rng)
        self.b.data[h:2 * h] = 1.0
        self.w_out = ad.parameter((d, h), rng)
        self.b_out = ad.parameter((d,), rng)

    @classmethod
    def zeros(cls, table: EmbeddingTable, hidden_size: int) -> "LstmLm":
        lm = cls(table, hidden_size, np.random.default_rng(0))
        for _, p in lm.named_parameters():
            p.data[:] = 0.0
        return lm

    def named_parameters(self) -> list[tuple[str, ad.Tensor]]:
        return [("lm.w_x", self.w_x), ("lm.w_h", self.w_h), ("lm.b", self.b),
                ("lm.w_out", self.w_out), ("lm.b_out", self.b_out)]

    def init_state(self) -> LmState:
        h = self.hidden_size
        return LmState(ad.Tensor(np.zeros(h)), ad.Tensor(np.zeros(h)))

    def step(self, state: LmState, token_id: int) -> tuple[LmState, ad.Tensor]:
        """One LSTM step on the embedding of token_id.

        Returns the new state and the vocabulary-wide logits
        project(linear(hidden)). Out-of-range ids raise IndexError.
        """
        h = self.hidden_size
        x = self.table.embed(token_id)
        pre = ad.matmul(self.w_x, x) + ad.matmul(self.w_h, state.hidden) + self.b
        gi = ad.sigmoid(ad.slice1d(pre, 0, h))
        gf = ad.sigmoid(ad.slice1d(pre, h, 2 * h))
        go = ad.sigmoid(ad.slice1d(pre, 2 * h, 3 * h))
        gc = ad.tanh(ad.slice1d(pre, 3 * h, 4 * h))
        cell = gf * state.cell + gi * gc
        hidden = go * ad.tanh(cell)
        logits = self.table.project(ad.matmul(self.w_out, hidden) + self.b_out)
        return LmState(hidden, cell), logits

    def sentence_loss(self, token_ids: list[int]) -> ad.Tensor:
        """Teacher-forced negative log-likelihood of a sentence.

        BOS is prepended as the first input and EOS appended as the last
        target, so a sentence of n tokens contributes n+1 prediction terms.
        """
        if not token_ids:
            raise ValueError("sentence must be non-empty")
        state = self.init_state()
        total = None
        for inp, tgt in zip([BOS_ID] + list(token_ids), list(token_ids) + [EOS_ID]):
            state, logits = self.step(state, inp)
            nll = -ad.log(ad.pick(ad.softmax(logits), tgt))
            total = nll if total is None else total + nll
        return total
