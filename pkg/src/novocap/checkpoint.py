"""Checkpoint format: a JSON manifest plus a raw binary sidecar.

``<prefix>.json`` records version, vocabulary (tokens and sha256), config
echo, step counter, scheduler seed, and the ordered list of named arrays;
``<prefix>.bin`` is those arrays' little-endian float64 bytes concatenated
in manifest order. Optimizer moments ride along as ``adam.m.*``/``adam.v.*``
arrays so a resumed run continues exactly where the saved one stopped.
Save -> load -> save is byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import read_json, write_json
from .errors import CheckpointError
from .fusion import CaptionModel
from .lm import LstmLm
from .training import Adam
from .vision import VisionHead
from .vocab import EmbeddingTable, Vocabulary

CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    version: int
    tokens: list[str]
    vocab_hash: str
    config: dict
    step: int
    rng: dict
    arrays: dict[str, np.ndarray]
    array_order: list[str]
    optimizer_t: int | None


def save_checkpoint(prefix, model: CaptionModel, config: dict, step: int,
                    opt: Adam | None = None) -> tuple[Path, Path]:
    prefix = Path(prefix)
    named = list(model.named_parameters())
    arrays: list[tuple[str, np.ndarray]] = [(n, p.data) for n, p in named]
    optimizer = None
    if opt is not None:
        state = opt.state_dict()
        optimizer = {"t": state["t"], "params": sorted(state["m"])}
        for n in optimizer["params"]:
            arrays.append((f"adam.m.{n}", state["m"][n]))
        for n in optimizer["params"]:
            arrays.append((f"adam.v.{n}", state["v"][n]))

    manifest = {
        "version": CHECKPOINT_VERSION,
        "vocab": {"tokens": model.vocab.tokens, "hash": model.vocab.hash()},
        "config": config,
        "step": step,
        "rng": {"scheduler_seed": config.get("seed", 0)},
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
        "optimizer": optimizer,
    }
    json_path = prefix.with_suffix(".json")
    bin_path = prefix.with_suffix(".bin")
    write_json(json_path, manifest)
    with open(bin_path, "wb") as fh:
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return json_path, bin_path


def load_checkpoint(prefix) -> Checkpoint:
    prefix = Path(prefix)
    json_path = prefix.with_suffix(".json")
    bin_path = prefix.with_suffix(".bin")
    if not json_path.exists() or not bin_path.exists():
        raise CheckpointError(f"checkpoint files not found at {prefix}(.json/.bin)")
    manifest = read_json(json_path)
    if manifest.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {manifest.get('version')}")

    tokens = manifest["vocab"]["tokens"]
    stored_hash = manifest["vocab"]["hash"]
    actual = Vocabulary.from_tokens(tokens).hash()
    if actual != stored_hash:
        raise CheckpointError("vocabulary hash mismatch: checkpoint is corrupt "
                              "or was edited")

    raw = np.fromfile(bin_path, dtype="<f8")
    arrays: dict[str, np.ndarray] = {}
    order: list[str] = []
    pos = 0
    for entry in manifest["arrays"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) if shape else 1
        if pos + size > raw.size:
            raise CheckpointError("binary sidecar shorter than manifest declares")
        arrays[entry["name"]] = raw[pos:pos + size].reshape(shape).astype(np.float64)
        order.append(entry["name"])
        pos += size
    if pos != raw.size:
        raise CheckpointError("binary sidecar longer than manifest declares")

    optimizer = manifest.get("optimizer")
    return Checkpoint(
        version=manifest["version"],
        tokens=tokens,
        vocab_hash=stored_hash,
        config=manifest.get("config", {}),
        step=int(manifest.get("step", 0)),
        rng=manifest.get("rng", {}),
        arrays=arrays,
        array_order=order,
        optimizer_t=None if optimizer is None else int(optimizer["t"]),
    )


def restore_model(ckpt: Checkpoint) -> CaptionModel:
    """Rebuild the model solely from array shapes and the config echo."""
    vocab = Vocabulary.from_tokens(ckpt.tokens)
    matrix = ckpt.arrays["embeddings.matrix"]
    frozen = bool(ckpt.config.get("freeze_embeddings", True))
    table = EmbeddingTable(vocab, matrix, frozen=frozen)

    hidden = ckpt.arrays["lm.w_h"].shape[1]
    lm = LstmLm.zeros(table, hidden)
    feature_dim = ckpt.arrays["vision.w1"].shape[1]
    visual_hidden = ckpt.arrays["vision.w1"].shape[0]
    vision = VisionHead.zeros(feature_dim, visual_hidden, len(vocab))
    model = CaptionModel(vocab, table, lm, vision)
    for name, param in model.named_parameters():
        if name == "embeddings.matrix":
            continue
        if name not in ckpt.arrays:
            raise CheckpointError(f"checkpoint missing array {name!r}")
        if param.data.shape != ckpt.arrays[name].shape:
            raise CheckpointError(f"array {name!r} has shape {ckpt.arrays[name].shape}, "
                                  f"expected {param.data.shape}")
        param.data[:] = ckpt.arrays[name]
    return model


def optimizer_state(ckpt: Checkpoint) -> dict | None:
    """Adam state dict from the sidecar arrays, or None if not saved."""
    if ckpt.optimizer_t is None:
        return None
    m = {n[len("adam.m."):]: a for n, a in ckpt.arrays.items() if n.startswith("adam.m.")}
    v = {n[len("adam.v."):]: a for n, a in ckpt.arrays.items() if n.startswith("adam.v.")}
    return {"t": ckpt.optimizer_t, "m": m, "v": v}
