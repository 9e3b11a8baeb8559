"""Run configuration: model dimensions, optimizer, and loss settings.

Defaults follow the published setup where one exists (interaction stage
30 epochs at batch 2, affinity stage 80 epochs at batch 16, learning rate
2e-5 for both); everything else is an explicit, overridable choice.
Config files are TOML with [model], [focal], [latent] sub-tables.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import FormatError
from .losses import FocalConfig, LatentConfig


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 64
    d_graph: int = 64
    d_fg: int = 16
    d_pos: int = 16
    gcn_layers: int = 2
    heads: int = 4
    unet_base: int = 16
    d_unet: int = 16
    affinity_hidden: tuple = (256, 64)


@dataclass(frozen=True)
class TrainConfig:
    stage: str
    epochs: int
    batch_size: int
    learning_rate: float = 2e-5
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # never used by default; exposed so experiments don't need code changes
    grad_clip: float | None = None
    weight_decay: float = 0.0
    dropout: float = 0.0
    model: ModelConfig = field(default_factory=ModelConfig)
    focal: FocalConfig = field(default_factory=FocalConfig)
    latent: LatentConfig = field(default_factory=LatentConfig)


def interaction_defaults(**overrides) -> TrainConfig:
    base = dict(stage="interaction", epochs=30, batch_size=2)
    base.update(overrides)
    return TrainConfig(**base)


def affinity_defaults(**overrides) -> TrainConfig:
    base = dict(stage="affinity", epochs=80, batch_size=16)
    base.update(overrides)
    return TrainConfig(**base)


def _build(cls, table: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(table) - names
    if unknown:
        raise FormatError(f"{where}: unknown keys {sorted(unknown)}")
    if cls is ModelConfig and "affinity_hidden" in table:
        table = dict(table, affinity_hidden=tuple(table["affinity_hidden"]))
    return cls(**table)


def load_config(path) -> TrainConfig:
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from exc
    stage = raw.get("stage")
    if stage not in ("interaction", "affinity"):
        raise FormatError(f"{path}: stage must be 'interaction' or 'affinity'")
    defaults = interaction_defaults if stage == "interaction" else affinity_defaults
    sub = {}
    for key, cls in (("model", ModelConfig), ("focal", FocalConfig),
                     ("latent", LatentConfig)):
        if key in raw:
            sub[key] = _build(cls, raw.pop(key), f"{path} [{key}]")
    raw.pop("stage")
    top = {f.name for f in dataclasses.fields(TrainConfig)} - {"stage", "model",
                                                               "focal", "latent"}
    unknown = set(raw) - top
    if unknown:
        raise FormatError(f"{path}: unknown keys {sorted(unknown)}")
    return defaults(**raw, **sub)
