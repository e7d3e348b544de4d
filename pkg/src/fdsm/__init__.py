"""Frequency-aware diffusion models for synthetic motion latents.

The package splits into a small differentiable kernel (`tensor`, `spectral`,
`diffusion`, `losses`), the model itself (`denoiser`, `conditioning`), the
benchmark (`synthdata`), inference (`classifier`) and the experiment harness
(`config`, `checkpoint`, `harness`, `figures`, `cli`).
"""

from .config import (
    CurriculumConfig,
    DataConfig,
    DistillConfig,
    ExperimentConfig,
    InferenceConfig,
    ModelConfig,
    TrainConfig,
    apply_overrides,
    denoiser_config,
    fingerprint,
    load_config,
    resolve_master_seed,
    save_config,
)
from .denoiser import DenoiserConfig, denoise, denoise_graph, init_denoiser
from .diffusion import NoiseSchedule, estimate_z0, forward_diffuse, make_schedule
from .classifier import Model, classify, evaluate_accuracy, score_candidate
from .conditioning import ActionClass, KinematicHead, predict_intensity, train_head
from .harness import (
    Benchmark,
    TrainResult,
    build_benchmark,
    load_model,
    run_ablation,
    run_analyze_spectrum,
    run_distill,
    run_eval,
    run_train,
)
from .spectral import (
    GainFilter,
    apply_spectral_residual,
    band_energy,
    build_gain,
    dct_temporal,
    idct_temporal,
)
from .tensor import NonFiniteError, ParameterSet, Tensor, grad

__version__ = "0.1.0"

__all__ = [
    "ActionClass",
    "Benchmark",
    "CurriculumConfig",
    "DataConfig",
    "DenoiserConfig",
    "DistillConfig",
    "ExperimentConfig",
    "GainFilter",
    "InferenceConfig",
    "KinematicHead",
    "Model",
    "ModelConfig",
    "NoiseSchedule",
    "NonFiniteError",
    "ParameterSet",
    "Tensor",
    "TrainConfig",
    "TrainResult",
    "apply_overrides",
    "apply_spectral_residual",
    "band_energy",
    "build_benchmark",
    "build_gain",
    "classify",
    "dct_temporal",
    "denoise",
    "denoise_graph",
    "denoiser_config",
    "estimate_z0",
    "evaluate_accuracy",
    "fingerprint",
    "forward_diffuse",
    "grad",
    "idct_temporal",
    "init_denoiser",
    "load_config",
    "load_model",
    "make_schedule",
    "predict_intensity",
    "resolve_master_seed",
    "run_ablation",
    "run_analyze_spectrum",
    "run_distill",
    "run_eval",
    "run_train",
    "save_config",
    "score_candidate",
    "train_head",
]
