"""Run configuration: flat key/value files, overrides and snapshots."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .decoders import POOLING_MODES
from .layers import FUSION_MODES


LOSS_REDUCTIONS = ("mean", "sum")


class ConfigError(ValueError):
    def __init__(self, msg: str, key: str | None = None):
        super().__init__(msg)
        self.key = key


@dataclass
class TrainConfig:
    # optimization (reference hyper-parameters)
    seed: int = 42
    batch_size: int = 8
    epochs: int = 20
    encoder_lr: float = 2e-5
    decoder_lr: float = 1e-4
    warmup: float = 0.1
    weight_decay: float = 0.01
    dropout: float = 0.3
    threshold_1: float = 0.5
    threshold_2: float = 0.5
    threshold_3: float = 0.5
    threshold_4: float = 0.5
    threshold_5: float = 0.5
    # architecture (desk scale)
    dim: int = 64
    layers: int = 2
    heads: int = 4
    max_len: int = 64
    pos_dim: int = 16
    max_distance: int = 16
    fusion: str = "cln"
    pooling: str = "adaptive"
    self_attention: bool = True
    position_embedding: bool = True
    indicator: bool = True
    attention_ff: bool = False
    share_type_embeddings: bool = True
    # experiment switches
    negative_types: int = 0
    sample_conditions: bool = False
    strict_roles: bool = False
    # batch reduction of per-sentence summed losses: "mean" or "sum"
    loss_reduction: str = "mean"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("encoder_lr", "decoder_lr"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive", name)
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1", "batch_size")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0", "epochs")
        if not 0.0 <= self.warmup <= 1.0:
            raise ConfigError("warmup must lie in [0, 1]", "warmup")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)", "dropout")
        for i in range(1, 6):
            v = getattr(self, f"threshold_{i}")
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"threshold_{i} must lie in [0, 1]", f"threshold_{i}")
        if self.fusion not in FUSION_MODES:
            raise ConfigError(f"fusion must be one of {FUSION_MODES}", "fusion")
        if self.pooling not in POOLING_MODES:
            raise ConfigError(f"pooling must be one of {POOLING_MODES}", "pooling")
        if self.loss_reduction not in LOSS_REDUCTIONS:
            raise ConfigError(f"loss_reduction must be one of {LOSS_REDUCTIONS}", "loss_reduction")
        if self.dim % self.heads:
            raise ConfigError("dim must be divisible by heads", "dim")

    @property
    def thresholds(self) -> tuple[float, float, float, float, float]:
        return tuple(getattr(self, f"threshold_{i}") for i in range(1, 6))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict):
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}", key)
        return cls(**data)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass
class RunConfig(TrainConfig):
    schema: str = ""
    train: str = ""
    dev: str = ""
    test: str = ""
    checkpoint: str = ""
    output: str = ""

    def train_config(self) -> TrainConfig:
        names = {f.name for f in fields(TrainConfig)}
        return TrainConfig(**{k: v for k, v in self.to_dict().items() if k in names})

    def check_paths(self, *keys: str) -> None:
        for key in keys:
            value = getattr(self, key)
            if not value:
                raise ConfigError(f"{key} path is required", key)
            if not Path(value).exists():
                raise ConfigError(f"{key} path {value!r} does not exist", key)


def full_scale() -> TrainConfig:
    """Reference hyper-parameters with a BERT-base-shaped encoder."""
    return TrainConfig(dim=768, layers=12, heads=12, max_len=512, pos_dim=64, max_distance=50)


def _field_types(cls) -> dict[str, type]:
    return {f.name: type(f.default) for f in fields(cls)}


def coerce(cls, key: str, raw: str):
    types = _field_types(cls)
    if key not in types:
        raise ConfigError(f"unknown config key {key!r}", key)
    kind = types[key]
    text = raw.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        return kind(text)
    except ValueError as exc:
        raise ConfigError(f"bad value {raw!r} for {key}", key) from exc


def parse_config_text(text: str, cls=RunConfig) -> dict:
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected key = value")
        key, raw = line.split("=", 1)
        key = key.strip()
        values[key] = coerce(cls, key, raw)
    return values


def load_config(path, cls=RunConfig, overrides: dict | None = None):
    values = parse_config_text(Path(path).read_text(encoding="utf-8"), cls) if path else {}
    values.update(overrides or {})
    return cls.from_dict(values)


def format_config(config) -> str:
    lines = []
    for key, value in config.to_dict().items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def save_config(config, path) -> None:
    Path(path).write_text(format_config(config), encoding="utf-8")
