"""Experiment configuration: one JSON-serializable tree, overridable by
dotted keys (the CLI maps kebab-case flags onto these)."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .classifier import InferenceConfig
from .conditioning import CurriculumConfig, DistillConfig
from .denoiser import DenoiserConfig

SEED_ENV_VAR = "FDSM_SEED"


@dataclass(frozen=True)
class DataConfig:
    num_classes: int = 10
    seen_fraction: float = 0.8
    channels: int = 8
    length: int = 16
    joints: int = 5
    mode: str = "freq-only"          # freq-only | mixed
    jitter: float = 0.05
    detail_amp: float = 1.3
    samples_per_class: int = 32
    eval_samples_per_class: int = 8
    n_desc: int = 5
    high_fraction: float = 0.55
    classes_file: str | None = None  # optional JSON with hand-written classes


@dataclass(frozen=True)
class ModelConfig:
    depth: int = 2
    model_dim: int = 32
    heads: int = 1
    mlp_ratio: int = 4
    text_dim: int = 64
    cutoff: int = 4
    alpha: float = 1.0
    gating: str = "predicted"


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 20000
    batch_size: int = 64
    lr: float = 1e-4
    weight_decay: float = 0.01
    warmup: int = 100
    timesteps: int = 50
    schedule: str = "linear"
    lambda_freq: float = 1.0
    gamma: float = 1.0
    fixed_noise: bool = False
    cond_dropout: float = 0.2
    use_srm: bool = True
    use_freq_loss: bool = True
    use_curriculum: bool = True
    metrics_every: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    distill: DistillConfig = field(default_factory=DistillConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @staticmethod
    def from_dict(payload: dict) -> "ExperimentConfig":
        return from_dict(payload)


_SECTIONS = {
    "data": DataConfig,
    "model": ModelConfig,
    "train": TrainConfig,
    "curriculum": CurriculumConfig,
    "inference": InferenceConfig,
    "distill": DistillConfig,
}


def from_dict(payload: dict) -> ExperimentConfig:
    """Rebuild a config tree; unknown keys raise instead of being dropped."""
    payload = dict(payload)
    kwargs: dict[str, Any] = {}
    if "master_seed" in payload:
        kwargs["master_seed"] = int(payload.pop("master_seed"))
    for name, cls in _SECTIONS.items():
        if name in payload:
            section = dict(payload.pop(name))
            valid = {f.name for f in dataclasses.fields(cls)}
            unknown = set(section) - valid
            if unknown:
                raise ValueError(f"unknown keys in '{name}' section: {sorted(unknown)}")
            if name == "distill" and "text_dim" in section:
                section.pop("text_dim")  # mirrors model.text_dim; see resolve below
            kwargs[name] = cls(**section)
    if payload:
        raise ValueError(f"unknown config sections: {sorted(payload)}")
    cfg = ExperimentConfig(**kwargs)
    return _sync_distill_dim(cfg)


def _sync_distill_dim(cfg: ExperimentConfig) -> ExperimentConfig:
    if cfg.distill.text_dim != cfg.model.text_dim:
        distill = dataclasses.replace(cfg.distill, text_dim=cfg.model.text_dim)
        return dataclasses.replace(cfg, distill=distill)
    return cfg


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    return from_dict(json.loads(Path(path).read_text()))


def save_config(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def apply_overrides(cfg: ExperimentConfig, overrides: dict[str, Any]) -> ExperimentConfig:
    """Apply {"section.key": value} (or {"master_seed": value}) overrides."""
    payload = cfg.to_dict()
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        target = payload
        for part in parts[:-1]:
            if part not in target:
                raise KeyError(f"unknown config path '{dotted}'")
            target = target[part]
        if parts[-1] not in target:
            raise KeyError(f"unknown config path '{dotted}'")
        target[parts[-1]] = value
    return from_dict(payload)


def resolve_master_seed(cfg: ExperimentConfig) -> int:
    """The configured seed, unless the FDSM_SEED env var overrides it."""
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None and env != "":
        return int(env)
    return cfg.master_seed


def denoiser_config(cfg: ExperimentConfig) -> DenoiserConfig:
    """Concrete network shape; disabling the residual module degenerates the
    gating to 'none', which skips the gain sites entirely."""
    gating = cfg.model.gating if cfg.train.use_srm else "none"
    return DenoiserConfig(
        channels=cfg.data.channels,
        length=cfg.data.length,
        joints=cfg.data.joints,
        depth=cfg.model.depth,
        model_dim=cfg.model.model_dim,
        heads=cfg.model.heads,
        mlp_ratio=cfg.model.mlp_ratio,
        text_dim=cfg.model.text_dim,
        cutoff=cfg.model.cutoff,
        alpha=cfg.model.alpha,
        gating=gating,
    )


def fingerprint(cfg: ExperimentConfig) -> str:
    """Short stable digest of the full configuration."""
    canon = json.dumps(cfg.to_dict(), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:12]
