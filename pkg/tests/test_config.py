"""Config tree: serialization, dotted overrides, seed resolution, and the
derived network shape."""

import json

import numpy as np
import pytest

from fdsm.config import (
    SEED_ENV_VAR,
    ExperimentConfig,
    apply_overrides,
    denoiser_config,
    fingerprint,
    from_dict,
    load_config,
    resolve_master_seed,
    save_config,
)


def test_roundtrip_through_dict_and_json(tmp_path):
    cfg = apply_overrides(
        ExperimentConfig(),
        {"train.lr": 3e-4, "data.mode": "mixed", "master_seed": 9},
    )
    assert from_dict(cfg.to_dict()) == cfg
    path = tmp_path / "config.json"
    save_config(cfg, path)
    assert load_config(path) == cfg
    assert load_config(None) == ExperimentConfig()


def test_from_dict_rejects_unknown_keys():
    payload = ExperimentConfig().to_dict()
    payload["train"]["momentum"] = 0.9
    with pytest.raises(ValueError, match="momentum"):
        from_dict(payload)
    with pytest.raises(ValueError, match="sections"):
        from_dict({"optimizer": {}})


def test_apply_overrides_dotted_paths():
    cfg = apply_overrides(ExperimentConfig(), {"train.iterations": 500})
    assert cfg.train.iterations == 500
    assert cfg.data == ExperimentConfig().data  # untouched sections identical
    with pytest.raises(KeyError, match="train.max_steps"):
        apply_overrides(ExperimentConfig(), {"train.max_steps": 1})
    with pytest.raises(KeyError, match="optimizer.lr"):
        apply_overrides(ExperimentConfig(), {"optimizer.lr": 0.1})


def test_defaults_are_the_documented_protocol():
    cfg = ExperimentConfig()
    assert cfg.train.iterations == 20000
    assert cfg.train.batch_size == 64
    assert cfg.train.lr == 1e-4
    assert cfg.train.weight_decay == 0.01
    assert cfg.train.warmup == 100
    assert cfg.train.timesteps == 50
    assert cfg.train.lambda_freq == 1.0
    assert cfg.train.gamma == 1.0
    assert cfg.inference.t_test == 25
    assert cfg.inference.num_noise_seeds == 10
    assert cfg.inference.decision == "mean-distance"
    assert cfg.inference.condition_source == "rich-mean"
    assert cfg.data.num_classes == 10
    assert cfg.data.seen_fraction == 0.8
    assert cfg.model.cutoff == 4
    assert cfg.model.alpha == 1.0


def test_distill_dim_follows_model_text_dim():
    cfg = apply_overrides(ExperimentConfig(), {"model.text_dim": 48})
    assert cfg.distill.text_dim == 48


def test_seed_env_override(monkeypatch):
    cfg = ExperimentConfig(master_seed=5)
    monkeypatch.delenv(SEED_ENV_VAR, raising=False)
    assert resolve_master_seed(cfg) == 5
    monkeypatch.setenv(SEED_ENV_VAR, "77")
    assert resolve_master_seed(cfg) == 77
    monkeypatch.setenv(SEED_ENV_VAR, "")
    assert resolve_master_seed(cfg) == 5


def test_denoiser_config_mirrors_sections():
    cfg = ExperimentConfig()
    dcfg = denoiser_config(cfg)
    assert dcfg.channels == cfg.data.channels
    assert dcfg.length == cfg.data.length
    assert dcfg.joints == cfg.data.joints
    assert dcfg.cutoff == cfg.model.cutoff
    assert dcfg.gating == "predicted"
    no_srm = apply_overrides(cfg, {"train.use_srm": False})
    assert denoiser_config(no_srm).gating == "none"


def test_fingerprint_tracks_content():
    a = fingerprint(ExperimentConfig())
    b = fingerprint(ExperimentConfig())
    assert a == b
    c = fingerprint(apply_overrides(ExperimentConfig(), {"train.lr": 2e-4}))
    assert a != c
    assert len(a) == 12
