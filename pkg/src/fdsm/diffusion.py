"""Forward noising process and its exact single-step inversion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor

BETA_START = 1e-4
BETA_END = 0.02


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step noise levels; t is 1-indexed, entry t lives at index t-1."""

    timesteps: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray


def make_schedule(timesteps: int, kind: str = "linear") -> NoiseSchedule:
    """Build a noise schedule.

    ``linear`` interpolates beta between 1e-4 and 0.02 across the run;
    ``cosine`` derives beta from a squared-cosine signal-retention curve.
    """
    if timesteps < 1:
        raise ValueError(f"timesteps must be >= 1, got {timesteps}")
    if kind == "linear":
        beta = np.linspace(BETA_START, BETA_END, timesteps, dtype=np.float64)
    elif kind == "cosine":
        s = 0.008
        steps = np.arange(timesteps + 1, dtype=np.float64) / timesteps
        f = np.cos((steps + s) / (1.0 + s) * np.pi / 2.0) ** 2
        ab = f / f[0]
        beta = np.clip(1.0 - ab[1:] / ab[:-1], 0.0, 0.999)
    else:
        raise ValueError(f"unknown schedule kind '{kind}'")
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    if np.any(alpha_bar <= 0.0):
        raise ValueError("signal retention collapsed to zero; schedule invalid")
    return NoiseSchedule(timesteps=timesteps, beta=beta, alpha=alpha, alpha_bar=alpha_bar)


def _alpha_bar_coeffs(schedule: NoiseSchedule, t, tail_ndim: int):
    """sqrt(alpha_bar_t) and sqrt(1 - alpha_bar_t), shaped to broadcast.

    ``t`` may be a single int or an integer array for a batched leading axis.
    """
    t_arr = np.asarray(t)
    if t_arr.ndim > 1:
        raise ValueError("t must be a scalar or a 1-D batch of steps")
    if not np.issubdtype(t_arr.dtype, np.integer):
        raise ValueError(f"t must be integral, got dtype {t_arr.dtype}")
    if np.any(t_arr < 1) or np.any(t_arr > schedule.timesteps):
        raise ValueError(
            f"t must lie in [1, {schedule.timesteps}], got {np.atleast_1d(t_arr)}"
        )
    ab = schedule.alpha_bar[t_arr - 1]
    if t_arr.ndim == 1:
        ab = ab.reshape((-1,) + (1,) * tail_ndim)
    return np.sqrt(ab), np.sqrt(1.0 - ab)


def forward_diffuse(z0: np.ndarray, t, eps: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """z_t = sqrt(abar_t) * z0 + sqrt(1 - abar_t) * eps.

    Accepts one latent with an int t, or a batch with a matching 1-D t.
    """
    z0 = np.asarray(z0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != z0.shape:
        raise ValueError(f"noise shape {eps.shape} does not match latent shape {z0.shape}")
    batched = np.asarray(t).ndim == 1
    tail = z0.ndim - 1 if batched else z0.ndim
    signal, noise = _alpha_bar_coeffs(schedule, t, tail)
    return signal * z0 + noise * eps


def estimate_z0(z_t, eps_hat, t, schedule: NoiseSchedule):
    """Invert the forward step: z0_hat = (z_t - sqrt(1-abar)*eps_hat) / sqrt(abar).

    Affine in ``eps_hat``, so a Tensor prediction keeps its graph and the
    spectral loss can differentiate straight through the inversion.
    """
    z_arr = z_t.data if isinstance(z_t, Tensor) else np.asarray(z_t, dtype=np.float64)
    e_arr = eps_hat.data if isinstance(eps_hat, Tensor) else np.asarray(eps_hat, dtype=np.float64)
    if e_arr.shape != z_arr.shape:
        raise ValueError(
            f"prediction shape {e_arr.shape} does not match latent shape {z_arr.shape}"
        )
    batched = np.asarray(t).ndim == 1
    tail = z_arr.ndim - 1 if batched else z_arr.ndim
    signal, noise = _alpha_bar_coeffs(schedule, t, tail)
    inv = 1.0 / signal
    return eps_hat * (-noise * inv) + z_t * inv
