"""Caption generation: greedy, beam, and sample-and-rank decoding.

Decoding is read-only on the model and works on raw arrays (no gradient
tape). BOS and UNK are masked to -inf in every step distribution, so a
generated caption can never contain them; EOS ends a sequence and its log
probability is part of the sequence score. A result shorter than max_len
therefore always ended on EOS, which is the convention score_tokens uses
when re-scoring caption files.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .fusion import CaptionModel
from .vocab import BOS_ID, EOS_ID, UNK_ID


@dataclass
class DecodeResult:
    tokens: list[int]   # emitted caption, EOS excluded
    log_prob: float     # sum of per-step log probabilities, EOS step included
    method: str


def _masked_log_probs(f_cm: np.ndarray) -> np.ndarray:
    logits = f_cm.copy()
    logits[BOS_ID] = -np.inf
    logits[UNK_ID] = -np.inf
    shifted = logits - logits.max()
    log_norm = np.log(np.exp(shifted).sum())
    return shifted - log_norm


def greedy_decode(model: CaptionModel, features: np.ndarray, max_len: int) -> DecodeResult:
    """Argmax at every step (ties go to the lowest token id); stops at EOS
    or after max_len emitted tokens. Identical to beam_decode with width 1."""
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    tokens: list[int] = []
    log_prob = 0.0
    with ad.no_grad():
        f_im = model.vision.activations(features)
        state = model.lm.init_state()
        prev = BOS_ID
        for _ in range(max_len):
            state, f_cm = model.fused_step(state, prev, f_im)
            logp = _masked_log_probs(f_cm.data)
            w = int(np.argmax(logp))
            log_prob += float(logp[w])
            if w == EOS_ID:
                break
            tokens.append(w)
            prev = w
    return DecodeResult(tokens, log_prob, "greedy")


def beam_decode(model: CaptionModel, features: np.ndarray, width: int,
                max_len: int) -> DecodeResult:
    """Beam search over summed log probabilities. Finished hypotheses stay
    in the beam and compete on total log_prob; ties break lexicographically
    on the token id sequence (EOS included for finished ones)."""
    if width < 1:
        raise ValueError("beam width must be at least 1")
    if max_len < 1:
        raise ValueError("max_len must be at least 1")

    def sort_key(cand):
        lp, toks, _state, _prev, finished = cand
        return (-lp, toks + ((EOS_ID,) if finished else ()))

    with ad.no_grad():
        f_im = model.vision.activations(features)
        beams = [(0.0, (), model.lm.init_state(), BOS_ID, False)]
        for _ in range(max_len):
            if all(b[4] for b in beams):
                break
            candidates = []
            for lp, toks, state, prev, finished in beams:
                if finished:
                    candidates.append((lp, toks, None, None, True))
                    continue
                new_state, f_cm = model.fused_step(state, prev, f_im)
                logp = _masked_log_probs(f_cm.data)
                for w in range(logp.size):
                    if not np.isfinite(logp[w]):
                        continue
                    nl = lp + float(logp[w])
                    if w == EOS_ID:
                        candidates.append((nl, toks, None, None, True))
                    else:
                        candidates.append((nl, toks + (w,), new_state, w, False))
            candidates.sort(key=sort_key)
            beams = candidates[:width]
    best = min(beams, key=sort_key)
    return DecodeResult(list(best[1]), best[0], "beam")


def _sample_once(model: CaptionModel, f_im, max_len: int,
                 rng: np.random.Generator) -> tuple[list[int], float]:
    state = model.lm.init_state()
    prev = BOS_ID
    tokens: list[int] = []
    log_prob = 0.0
    for _ in range(max_len):
        state, f_cm = model.fused_step(state, prev, f_im)
        logp = _masked_log_probs(f_cm.data)
        probs = np.exp(logp)
        probs /= probs.sum()
        w = int(rng.choice(probs.size, p=probs))
        log_prob += float(logp[w])
        if w == EOS_ID:
            break
        tokens.append(w)
        prev = w
    return tokens, log_prob


def sample_rank_decode(model: CaptionModel, features: np.ndarray, n: int,
                       max_len: int, seed: int, prefer: str = "best") -> DecodeResult:
    """Draw n ancestral samples and return the one with the highest total
    log probability (prefer="worst" flips the comparator); ties keep the
    earliest sample."""
    if n < 1:
        raise ValueError("need at least one sample")
    if prefer not in ("best", "worst"):
        raise ValueError(f"prefer must be 'best' or 'worst', got {prefer!r}")
    rng = np.random.default_rng(seed)
    chosen: DecodeResult | None = None
    with ad.no_grad():
        f_im = model.vision.activations(features)
        for _ in range(n):
            tokens, log_prob = _sample_once(model, f_im, max_len, rng)
            better = (chosen is None
                      or (prefer == "best" and log_prob > chosen.log_prob)
                      or (prefer == "worst" and log_prob < chosen.log_prob))
            if better:
                chosen = DecodeResult(tokens, log_prob, "sample-rank")
    return chosen


def score_tokens(model: CaptionModel, features: np.ndarray, tokens: list[int],
                 max_len: int) -> float:
    """Independent re-scoring of an emitted sequence under the same masked
    step distributions. Sequences shorter than max_len are charged the
    terminal EOS step they must have taken."""
    lp = 0.0
    with ad.no_grad():
        f_im = model.vision.activations(features)
        state = model.lm.init_state()
        prev = BOS_ID
        for w in tokens:
            state, f_cm = model.fused_step(state, prev, f_im)
            lp += float(_masked_log_probs(f_cm.data)[w])
            prev = w
        if len(tokens) < max_len:
            state, f_cm = model.fused_step(state, prev, f_im)
            lp += float(_masked_log_probs(f_cm.data)[EOS_ID])
    return lp
