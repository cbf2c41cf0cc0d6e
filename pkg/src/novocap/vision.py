"""Multi-label visual recognition head.

A two-layer perceptron maps an image feature vector to one raw activation
per vocabulary token. Training uses a softmax over those activations
followed by per-label binary cross-entropy against the 0/1 label vector;
the probabilities compete across labels on purpose, which is pinned by
tests (independent per-label sigmoids would score the fixtures
differently).
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .dataio import ImageExample
from .vocab import BOS_ID, EOS_ID, UNK_ID, Vocabulary


def load_stopwords() -> set[str]:
    """Bundled stopword list; '#' lines are comments."""
    text = resources.files("novocap.data").joinpath("stopwords.txt").read_text("utf-8")
    return {line.strip() for line in text.splitlines()
            if line.strip() and not line.startswith("#")}


def extract_labels(caption: list[str], stopwords: set[str], vocab: Vocabulary) -> set[int]:
    """Distinct content-word ids of a caption: stopwords and control tokens
    are dropped, out-of-vocabulary tokens fall to UNK and are dropped too."""
    ids = set()
    for tok in caption:
        if tok in stopwords:
            continue
        i = vocab.encode([tok])[0]
        if i in (BOS_ID, EOS_ID, UNK_ID):
            continue
        ids.add(i)
    return ids


class VisionHead:
    """feature_dim -> hidden -> vocab_size perceptron with relu hidden."""

    def __init__(self, feature_dim: int, hidden_size: int, vocab_size: int,
                 rng: np.random.Generator):
        self.feature_dim = feature_dim
        self.hidden_size = hidden_size
        self.vocab_size = vocab_size
        self.w1 = ad.parameter((hidden_size, feature_dim), rng)
        self.b1 = ad.parameter((hidden_size,), rng)
        self.w2 = ad.parameter((vocab_size, hidden_size), rng)
        self.b2 = ad.parameter((vocab_size,), rng)

    @classmethod
    def zeros(cls, feature_dim: int, hidden_size: int, vocab_size: int) -> "VisionHead":
        head = cls(feature_dim, hidden_size, vocab_size, np.random.default_rng(0))
        for _, p in head.named_parameters():
            p.data[:] = 0.0
        return head

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return [("vision.w1", self.w1), ("vision.b1", self.b1),
                ("vision.w2", self.w2), ("vision.b2", self.b2)]

    def activations(self, features: np.ndarray) -> Tensor:
        """Raw (pre-softmax) scores over the vocabulary for one image."""
        x = features if isinstance(features, Tensor) else Tensor(features)
        hidden = ad.relu(ad.matmul(self.w1, x) + self.b1)
        return ad.matmul(self.w2, hidden) + self.b2

    def loss(self, features: np.ndarray, label_ids: set[int]) -> Tensor:
        """Softmax over activations, then binary cross-entropy per label."""
        s = ad.softmax(self.activations(features))
        z = np.zeros(self.vocab_size)
        for i in label_ids:
            z[int(i)] = 1.0
        ones = Tensor(np.ones(self.vocab_size))
        pos = Tensor(z) * ad.log(s)
        neg = Tensor(1.0 - z) * ad.log(ones - s)
        return -ad.tsum(pos + neg)


def label_recall_at_k(head: VisionHead, examples: list[ImageExample],
                      vocab: Vocabulary, targets: set[str], k: int) -> float:
    """Fraction of (image, target-label) pairs where the label lands in the
    head's top-k activations; the retention probe used to measure how much
    recognition a fine-tuning phase overwrote."""
    hits = 0
    total = 0
    with ad.no_grad():
        for ex in examples:
            present = ex.labels & targets
            if not present:
                continue
            acts = head.activations(ex.features).data
            top = set(np.argsort(-acts)[:k].tolist())
            for tok in present:
                total += 1
                if vocab.id(tok) in top:
                    hits += 1
    return hits / total if total else 0.0
