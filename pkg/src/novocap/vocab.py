"""Vocabulary and the shared word-embedding table.

The embedding matrix is used twice: as the input lookup (one row per token)
and, transposed, as the output projection back onto the vocabulary. Both
paths read the same Tensor, so semantically close tokens keep close scores
even when one of them never occurs in paired training data.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .errors import EmbeddingFormatError, MissingEmbeddingError

BOS = "<bos>"
EOS = "<eos>"
UNK = "<unk>"
RESERVED = (BOS, EOS, UNK)
BOS_ID, EOS_ID, UNK_ID = 0, 1, 2


class Vocabulary:
    """Bijective token<->id map with BOS/EOS/UNK pinned at ids 0, 1, 2."""

    def __init__(self, content_tokens: Iterable[str]):
        tokens = list(RESERVED) + [t for t in content_tokens if t not in RESERVED]
        self._tokens = tokens
        self._ids = {t: i for i, t in enumerate(tokens)}
        if len(self._ids) != len(tokens):
            seen: set[str] = set()
            dup = next(t for t in tokens if t in seen or seen.add(t))
            raise ValueError(f"duplicate token in vocabulary: {dup!r}")

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "Vocabulary":
        """Rebuild from a full token list (reserved tokens included, in order)."""
        if tuple(tokens[:3]) != RESERVED:
            raise ValueError(f"token list must start with {RESERVED}")
        return cls(tokens[3:])

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    def id(self, token: str) -> int:
        try:
            return self._ids[token]
        except KeyError:
            raise KeyError(f"token not in vocabulary: {token!r}") from None

    def token(self, idx: int) -> str:
        if not 0 <= idx < len(self._tokens):
            raise IndexError(f"token id {idx} out of range for vocabulary of {len(self)}")
        return self._tokens[idx]

    def encode(self, tokens: Iterable[str], allow_unk: bool = True) -> list[int]:
        if allow_unk:
            return [self._ids.get(t, UNK_ID) for t in tokens]
        return [self.id(t) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.token(i) for i in ids]

    def hash(self) -> str:
        import hashlib

        return hashlib.sha256("\n".join(self._tokens).encode("utf-8")).hexdigest()


class EmbeddingTable:
    """V x d embedding matrix tied between input lookup and output projection.

    frozen=True (the default) keeps the matrix out of gradient updates so
    the neighbourhood structure of the pretrained vectors survives training.
    """

    def __init__(self, vocab: Vocabulary, matrix: np.ndarray, frozen: bool = True):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(vocab):
            raise ValueError(
                f"embedding matrix shape {matrix.shape} does not match vocabulary size {len(vocab)}"
            )
        self.vocab = vocab
        self.matrix = ad.Tensor(matrix, requires_grad=not frozen)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def frozen(self) -> bool:
        return not self.matrix.requires_grad

    @frozen.setter
    def frozen(self, value: bool) -> None:
        self.matrix.requires_grad = not value

    @classmethod
    def load(cls, path, vocab: Vocabulary, frozen: bool = True, seed: int = 0) -> "EmbeddingTable":
        """Read a plain-text embedding file: ``token v1 v2 ... vd`` per line.

        Rows are assigned by vocabulary id, so permuting file lines changes
        nothing. Reserved tokens absent from the file get seeded uniform rows
        in [-0.1, 0.1]; any other vocabulary token must be present.
        """
        vectors: dict[str, np.ndarray] = {}
        dim: int | None = None
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.split()
                if not parts:
                    continue
                token, fields = parts[0], parts[1:]
                if dim is None:
                    dim = len(fields)
                    if dim == 0:
                        raise EmbeddingFormatError(f"{path}:{lineno}: no vector components")
                elif len(fields) != dim:
                    raise EmbeddingFormatError(
                        f"{path}:{lineno}: expected {dim} components, found {len(fields)}"
                    )
                try:
                    vec = np.array([float(x) for x in fields], dtype=np.float64)
                except ValueError:
                    raise EmbeddingFormatError(f"{path}:{lineno}: non-numeric component") from None
                if token in vocab:
                    if token in vectors:
                        raise EmbeddingFormatError(f"{path}:{lineno}: duplicate token {token!r}")
                    vectors[token] = vec
        if dim is None:
            raise EmbeddingFormatError(f"{path}: empty embedding file")

        rng = np.random.default_rng(seed)
        matrix = np.zeros((len(vocab), dim))
        for tok in RESERVED:  # drawn in id order so the result is seed-stable
            filler = rng.uniform(-0.1, 0.1, size=dim)
            if tok not in vectors:
                vectors[tok] = filler
        for idx, tok in enumerate(vocab.tokens):
            if tok not in vectors:
                raise MissingEmbeddingError(f"no embedding for vocabulary token {tok!r}")
            matrix[idx] = vectors[tok]
        return cls(vocab, matrix, frozen=frozen)

    @classmethod
    def random(cls, vocab: Vocabulary, dim: int, seed: int, frozen: bool = False,
               scale: float = 0.12) -> "EmbeddingTable":
        """Small seeded-uniform rows, trainable by default: a from-scratch
        embedding layer, the baseline against pretrained vectors."""
        rng = np.random.default_rng(seed)
        matrix = rng.uniform(-scale, scale, size=(len(vocab), dim))
        return cls(vocab, matrix, frozen=frozen)

    def embed(self, token_id: int) -> ad.Tensor:
        """Input lookup: row token_id of the shared matrix."""
        return ad.row(self.matrix, token_id)

    def project(self, h: ad.Tensor) -> ad.Tensor:
        """Output projection: logits[v] = dot(row v, h). No bias term, so
        tokens unseen in training keep scores induced by their neighbours."""
        return ad.matmul(self.matrix, h)

    def nearest_neighbors(self, token: str, k: int) -> list[tuple[str, float]]:
        """k most cosine-similar tokens to the query, query excluded.

        Exact ties rank by ascending token id; zero-norm rows score 0.
        """
        if k >= len(self.vocab):
            raise ValueError(f"k={k} must be smaller than vocabulary size {len(self.vocab)}")
        qid = self.vocab.id(token)
        m = self.matrix.data
        norms = np.linalg.norm(m, axis=1)
        q = m[qid]
        qn = norms[qid]
        sims = np.zeros(len(self.vocab))
        ok = (norms > 0) & (qn > 0)
        sims[ok] = (m[ok] @ q) / (norms[ok] * qn)
        ranked = sorted((i for i in range(len(self.vocab)) if i != qid),
                        key=lambda i: (-sims[i], i))
        return [(self.vocab.token(i), float(sims[i])) for i in ranked[:k]]
