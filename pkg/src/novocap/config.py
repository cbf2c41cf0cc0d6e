"""Flat key=value run configuration.

Unknown keys are hard errors so a typo in an experiment grid cannot pass
silently; the error message lists every valid key.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .errors import ConfigError


@dataclass
class RunConfig:
    seed: int = 0
    steps: int = 400
    batch_size: int = 8
    image_batch_size: int = 0   # 0 means: use batch_size
    text_batch_size: int = 0
    learning_rate: float = 1e-3
    alpha: float = 1.0
    beta: float = 1.0
    clip_norm: float = 5.0
    hidden_size: int = 128
    visual_hidden: int = 64
    lm_pretrain_steps: int = 300
    vision_pretrain_steps: int = 200
    freeze_embeddings: bool = True
    pretrained_embeddings: bool = True
    visual_mode: str = "tuned"   # "tuned" or "fixed"
    max_len: int = 12

    def to_dict(self) -> dict:
        return asdict(self)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    if kind in ("bool", bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"key {key!r}: expected a boolean, got {raw!r}")
    try:
        if kind in ("int", int):
            return int(raw)
        if kind in ("float", float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r} as {kind}") from None
    return raw


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {stripped!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}; valid keys: "
                              + ", ".join(sorted(_FIELD_TYPES)))
        values[key] = _parse_value(key, raw)
    return values


def load_config(path=None, **overrides) -> RunConfig:
    values: dict = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            values.update(parse_config_text(fh.read(), source=str(path)))
    for key, val in overrides.items():
        if val is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}; valid keys: "
                              + ", ".join(sorted(_FIELD_TYPES)))
        values[key] = val
    cfg = RunConfig(**values)
    if cfg.visual_mode not in ("tuned", "fixed"):
        raise ConfigError(f"visual_mode must be 'tuned' or 'fixed', got {cfg.visual_mode!r}")
    for key in ("steps", "batch_size", "max_len"):
        if getattr(cfg, key) < 1:
            raise ConfigError(f"{key} must be at least 1")
    for key in ("learning_rate", "alpha", "beta", "clip_norm",
                "lm_pretrain_steps", "vision_pretrain_steps"):
        if getattr(cfg, key) < 0:
            raise ConfigError(f"{key} must be non-negative")
    return cfg
