"""Training losses: noise-prediction MSE, the step-weighted spectral term
that fades detail supervision as corruption grows, and the distillation BCE.

Every loss accepts plain arrays (returns a float) or a prediction Tensor
(returns a scalar Tensor carrying the graph).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral, tensor
from .tensor import Tensor


@dataclass(frozen=True)
class SpectralLossConfig:
    """Shape of the frequency weighting: cutoff, detail weight, horizon."""

    cutoff: int
    gamma: float
    timesteps: int


def _is_graph(*xs) -> bool:
    return any(isinstance(x, Tensor) for x in xs)


def _shape_of(x) -> tuple:
    return x.data.shape if isinstance(x, Tensor) else np.asarray(x).shape


def diffusion_loss(eps_hat, eps):
    """Mean squared error between predicted and true noise."""
    if _shape_of(eps_hat) != _shape_of(eps):
        raise ValueError(
            f"prediction shape {_shape_of(eps_hat)} does not match noise shape {_shape_of(eps)}"
        )
    if _is_graph(eps_hat, eps):
        diff = tensor.sub(eps_hat, eps)
        return tensor.tmean(tensor.mul(diff, diff))
    diff = np.asarray(eps_hat, dtype=np.float64) - np.asarray(eps, dtype=np.float64)
    return float(np.mean(diff * diff))


def spectral_weight(k: int, t: int, cfg: SpectralLossConfig) -> float:
    """W(k, t): 1 below the cutoff, gamma * (1 - t/T) at or above it."""
    if k < 0:
        raise ValueError(f"frequency index must be non-negative, got {k}")
    if not 1 <= t <= cfg.timesteps:
        raise ValueError(f"t must lie in [1, {cfg.timesteps}], got {t}")
    if k < cfg.cutoff:
        return 1.0
    return cfg.gamma * (1.0 - t / cfg.timesteps)


def _weight_vector(t_arr: np.ndarray, length: int, cfg: SpectralLossConfig) -> np.ndarray:
    """Weights for every (sample, frequency) pair, shape [B, L]."""
    if np.any(t_arr < 1) or np.any(t_arr > cfg.timesteps):
        raise ValueError(f"t must lie in [1, {cfg.timesteps}], got {t_arr}")
    k = np.arange(length)
    high = cfg.gamma * (1.0 - t_arr[:, None] / cfg.timesteps)
    return np.where(k[None, :] < cfg.cutoff, 1.0, high)


def _dct_any(x, axis: int):
    if isinstance(x, Tensor):
        return spectral.dct(x, axis=axis)
    arr = np.asarray(x, dtype=np.float64)
    mat = spectral.dct_matrix(arr.shape[axis])
    moved = np.moveaxis(arr, axis, -1)
    return np.moveaxis(moved @ mat.T, -1, axis)


def spectral_loss(z0, z0_hat, t, cfg: SpectralLossConfig):
    """Weighted squared spectral error, normalized by element count.

    Single latents are [C, L, V] with an int t; a batch adds a leading axis
    and takes a matching 1-D t (the batch contributes its mean).
    """
    shape = _shape_of(z0)
    if shape != _shape_of(z0_hat):
        raise ValueError(
            f"reconstruction shape {_shape_of(z0_hat)} does not match latent shape {shape}"
        )
    if len(shape) == 3:
        batched = False
        length = shape[1]
        t_arr = np.asarray([t], dtype=np.int64)
        axis = 1
    elif len(shape) == 4:
        batched = True
        length = shape[2]
        t_arr = np.asarray(t, dtype=np.int64)
        if t_arr.shape != (shape[0],):
            raise ValueError(f"batched t must have shape ({shape[0]},), got {t_arr.shape}")
        axis = 2
    else:
        raise ValueError(f"latents must be rank 3 or 4, got rank {len(shape)}")
    if not 0 < cfg.cutoff <= length:
        raise ValueError(f"cutoff must satisfy 0 < M <= L, got M={cfg.cutoff}, L={length}")

    weights = _weight_vector(t_arr, length, cfg)  # [B, L]
    if batched:
        w = weights[:, None, :, None]
        per_sample = shape[1] * shape[2] * shape[3]
        norm = per_sample * shape[0]
    else:
        w = weights[0][None, :, None]
        norm = shape[0] * shape[1] * shape[2]

    f_true = _dct_any(z0, axis)
    f_pred = _dct_any(z0_hat, axis)
    if _is_graph(f_true, f_pred):
        diff = tensor.sub(f_pred, f_true)
        weighted = tensor.mul(tensor.mul(diff, diff), w)
        return tensor.tsum(weighted) * (1.0 / norm)
    diff = f_pred - f_true
    return float(np.sum(w * diff * diff) / norm)


def total_loss(l_diff, l_freq, lambda_freq: float):
    """Combined objective: l_diff + lambda_freq * l_freq."""
    return l_diff + lambda_freq * l_freq


_BCE_EPS = 1e-7


def bce_distill_loss(s_hat, s_gt):
    """Binary cross-entropy against 0/1 intensity targets, mean over inputs.

    Predictions are clamped to [1e-7, 1 - 1e-7] before the logs.
    """
    targets = np.asarray(s_gt, dtype=np.float64)
    if not np.all((targets == 0.0) | (targets == 1.0)):
        raise ValueError("intensity targets must be 0 or 1")
    if isinstance(s_hat, Tensor):
        if s_hat.data.shape != targets.shape:
            raise ValueError(
                f"prediction shape {s_hat.data.shape} does not match target shape {targets.shape}"
            )
        p = tensor.clamp(s_hat, _BCE_EPS, 1.0 - _BCE_EPS)
        term = tensor.add(
            tensor.mul(tensor.log(p), targets),
            tensor.mul(tensor.log(tensor.sub(1.0, p)), 1.0 - targets),
        )
        return tensor.neg(tensor.tmean(term))
    p = np.clip(np.asarray(s_hat, dtype=np.float64), _BCE_EPS, 1.0 - _BCE_EPS)
    if p.shape != targets.shape:
        raise ValueError(f"prediction shape {p.shape} does not match target shape {targets.shape}")
    return float(-np.mean(targets * np.log(p) + (1.0 - targets) * np.log(1.0 - p)))
