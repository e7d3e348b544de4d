"""Temporal-attention noise predictor with an in-network detail gain.

Latents [C, L, V] become L temporal tokens of width C*V.  Each block runs
pre-modulated self-attention over the tokens, then re-filters the token
sequence along time — amplifying detail frequencies by (1 + alpha * s) where
s is the class-intensity gate — and finishes with a feature MLP.  The
timestep and the text embedding enter through one shared modulation vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import spectral, tensor
from .seeding import substream
from .tensor import ParameterSet, Tensor

_GATING_MODES = ("predicted", "none", "uniform", "random")


@dataclass(frozen=True)
class DenoiserConfig:
    channels: int = 8
    length: int = 16
    joints: int = 5
    depth: int = 2
    model_dim: int = 32
    heads: int = 1
    mlp_ratio: int = 4
    text_dim: int = 64
    cutoff: int = 4            # spectral boundary between kept and gained bands
    alpha: float = 1.0         # residual gain factor on the detail band
    gating: str = "predicted"  # predicted | none | uniform | random

    def __post_init__(self):
        if self.model_dim % self.heads != 0:
            raise ValueError(
                f"model_dim {self.model_dim} must be divisible by heads {self.heads}"
            )
        if not 0 < self.cutoff <= self.length:
            raise ValueError(
                f"cutoff must satisfy 0 < M <= L, got M={self.cutoff}, L={self.length}"
            )
        if self.gating not in _GATING_MODES:
            raise ValueError(f"gating must be one of {_GATING_MODES}, got '{self.gating}'")
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")


def timestep_embedding(t, dim: int) -> np.ndarray:
    """Interleaved sin/cos features of ``t`` at geometrically spaced
    frequencies (base 10000).  Scalar t -> [dim]; 1-D t -> [B, dim]."""
    if dim % 2 != 0:
        raise ValueError(f"embedding dim must be even, got {dim}")
    t_arr = np.asarray(t, dtype=np.float64)
    single = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half, dtype=np.float64) / half)
    angles = t_arr[:, None] * freqs[None, :]
    out = np.empty((t_arr.size, dim), dtype=np.float64)
    out[:, 0::2] = np.sin(angles)
    out[:, 1::2] = np.cos(angles)
    return out[0] if single else out


@lru_cache(maxsize=None)
def _position_encoding(length: int, dim: int) -> np.ndarray:
    return timestep_embedding(np.arange(length), dim)


def init_denoiser(config: DenoiserConfig, seed: int) -> ParameterSet:
    """Fresh parameters: weights ~ Normal(0, 0.02), biases zero, and a
    zero output projection so the initial noise prediction is exactly zero."""
    rng = substream(seed, "denoiser-init")
    d = config.model_dim
    feat = config.channels * config.joints
    hidden = config.mlp_ratio * d

    params = ParameterSet()

    def linear(name: str, fan_in: int, fan_out: int, zero: bool = False) -> None:
        if zero:
            params.add(f"{name}.weight", np.zeros((fan_in, fan_out)))
        else:
            params.add(f"{name}.weight", rng.normal(0.0, 0.02, size=(fan_in, fan_out)))
        params.add(f"{name}.bias", np.zeros(fan_out))

    linear("input", feat, d)
    linear("cond.text", config.text_dim, d)
    linear("cond.mlp1", d, d)
    linear("cond.mlp2", d, d)
    for i in range(config.depth):
        linear(f"block{i}.mod.scale", d, d)
        linear(f"block{i}.mod.shift", d, d)
        linear(f"block{i}.attn.q", d, d)
        linear(f"block{i}.attn.k", d, d)
        linear(f"block{i}.attn.v", d, d)
        linear(f"block{i}.attn.out", d, d)
        linear(f"block{i}.mlp.fc1", d, hidden)
        linear(f"block{i}.mlp.fc2", hidden, d)
    linear("output", d, feat, zero=True)
    return params


def effective_intensity(
    config: DenoiserConfig,
    s_hat,
    batch: int,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Resolve the gate value per sample according to the gating mode."""
    if config.gating == "none":
        return np.zeros(batch)
    if config.gating == "uniform":
        return np.ones(batch)
    if config.gating == "random":
        if rng is None:
            raise ValueError("gating mode 'random' needs an rng")
        return rng.uniform(0.0, 1.0, size=batch)
    s = np.broadcast_to(np.asarray(s_hat, dtype=np.float64), (batch,))
    if np.any(s < 0.0) or np.any(s > 1.0):
        raise ValueError(f"intensity scores must lie in [0, 1], got {s}")
    return s.copy()


def _scaled_gains(config: DenoiserConfig, length: int, s_eff: np.ndarray) -> np.ndarray:
    """Per-sample alpha * G rows, [B, L, 1]; cutoff rescales with length so
    cropped or downsampled sequences keep the same relative boundary."""
    cutoff = config.cutoff
    if length != config.length:
        cutoff = max(1, min(length, round(config.cutoff * length / config.length)))
    gains = np.zeros((s_eff.size, length, 1))
    gains[:, cutoff:, 0] = config.alpha * s_eff[:, None]
    return gains


def _attention(params: ParameterSet, prefix: str, h: Tensor, heads: int) -> Tensor:
    b, length, d = h.shape
    dh = d // heads
    q = tensor.matmul(h, params[f"{prefix}.q.weight"]) + params[f"{prefix}.q.bias"]
    k = tensor.matmul(h, params[f"{prefix}.k.weight"]) + params[f"{prefix}.k.bias"]
    v = tensor.matmul(h, params[f"{prefix}.v.weight"]) + params[f"{prefix}.v.bias"]
    q = tensor.transpose(tensor.reshape(q, (b, length, heads, dh)), (0, 2, 1, 3))
    k = tensor.transpose(tensor.reshape(k, (b, length, heads, dh)), (0, 2, 1, 3))
    v = tensor.transpose(tensor.reshape(v, (b, length, heads, dh)), (0, 2, 1, 3))
    scores = tensor.matmul(q, tensor.transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(dh))
    weights = tensor.softmax(scores, axis=-1)
    mixed = tensor.matmul(weights, v)
    mixed = tensor.reshape(tensor.transpose(mixed, (0, 2, 1, 3)), (b, length, d))
    return tensor.matmul(mixed, params[f"{prefix}.out.weight"]) + params[f"{prefix}.out.bias"]


def denoise_graph(
    config: DenoiserConfig,
    params: ParameterSet,
    z_t: np.ndarray,
    t: np.ndarray,
    d: np.ndarray,
    s_eff: np.ndarray,
) -> Tensor:
    """Batched differentiable forward pass.

    ``z_t`` is [B, C, L, V]; ``t``, ``s_eff`` are per-sample vectors and
    ``d`` is [B, text_dim].  Returns the noise prediction as a Tensor.
    """
    z_t = np.asarray(z_t, dtype=np.float64)
    if z_t.ndim != 4:
        raise ValueError(f"expected a [B, C, L, V] batch, got rank {z_t.ndim}")
    b, c, length, v = z_t.shape
    if c != config.channels or v != config.joints:
        raise ValueError(
            f"latent [{c} x {length} x {v}] does not match configured "
            f"channels/joints [{config.channels} x * x {config.joints}]"
        )
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (b, config.text_dim):
        raise ValueError(f"conditions must be [{b}, {config.text_dim}], got {d.shape}")
    t = np.asarray(t)
    if t.shape != (b,):
        raise ValueError(f"t must be a length-{b} vector, got shape {t.shape}")
    s_eff = np.asarray(s_eff, dtype=np.float64)
    if s_eff.shape != (b,):
        raise ValueError(f"s_eff must be a length-{b} vector, got shape {s_eff.shape}")

    dim = config.model_dim
    tokens = z_t.transpose(0, 2, 1, 3).reshape(b, length, c * v)
    h = tensor.matmul(tokens, params["input.weight"]) + params["input.bias"]
    h = h + _position_encoding(length, dim)

    cond_in = tensor.matmul(d, params["cond.text.weight"]) + params["cond.text.bias"]
    cond_in = cond_in + timestep_embedding(t, dim)
    cond = tensor.gelu(tensor.matmul(cond_in, params["cond.mlp1.weight"]) + params["cond.mlp1.bias"])
    cond = tensor.matmul(cond, params["cond.mlp2.weight"]) + params["cond.mlp2.bias"]

    gains = _scaled_gains(config, length, s_eff)

    for i in range(config.depth):
        # tanh keeps the modulation response bounded even for condition
        # vectors far from anything seen in training.
        scale = tensor.tanh(
            tensor.matmul(cond, params[f"block{i}.mod.scale.weight"])
            + params[f"block{i}.mod.scale.bias"]
        )
        shift = tensor.tanh(
            tensor.matmul(cond, params[f"block{i}.mod.shift.weight"])
            + params[f"block{i}.mod.shift.bias"]
        )
        h = h * (tensor.reshape(scale, (b, 1, dim)) + 1.0) + tensor.reshape(shift, (b, 1, dim))
        # The spectral refinement rides on the attention output before the
        # residual add, so the gate scales only what attention contributes.
        attn_out = _attention(params, f"block{i}.attn", h, config.heads)
        h = h + spectral.residual_scale(attn_out, gains, axis=1)
        up = tensor.gelu(tensor.matmul(h, params[f"block{i}.mlp.fc1.weight"]) + params[f"block{i}.mlp.fc1.bias"])
        h = h + (tensor.matmul(up, params[f"block{i}.mlp.fc2.weight"]) + params[f"block{i}.mlp.fc2.bias"])

    out = tensor.matmul(h, params["output.weight"]) + params["output.bias"]
    out = tensor.transpose(tensor.reshape(out, (b, length, c, v)), (0, 2, 1, 3))
    return out


def denoise(
    config: DenoiserConfig,
    params: ParameterSet,
    z_t: np.ndarray,
    t: int,
    d: np.ndarray,
    s_hat: float,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Noise prediction for one latent; the gating mode decides how much of
    ``s_hat`` actually reaches the detail gain."""
    z_t = np.asarray(z_t, dtype=np.float64)
    if z_t.ndim != 3:
        raise ValueError(f"expected one [C, L, V] latent, got rank {z_t.ndim}")
    s_eff = effective_intensity(config, s_hat, 1, rng)
    out = denoise_graph(
        config, params, z_t[None], np.asarray([t]), np.asarray(d)[None], s_eff
    )
    return out.data[0]
