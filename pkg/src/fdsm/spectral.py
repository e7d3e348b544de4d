"""Orthonormal temporal cosine transforms and the spectral residual gain.

The transform pair is an explicit L x L orthonormal matrix (sequences are
short, L <= 64), so round trips and energy preservation hold to float64
precision and the adjoint equals the inverse.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import tensor
from .tensor import Tensor


@lru_cache(maxsize=None)
def dct_matrix(length: int) -> np.ndarray:
    """Row k holds beta_k * cos(pi*(2l+1)*k / (2L)); rows are orthonormal."""
    if length < 1:
        raise ValueError(f"transform length must be positive, got {length}")
    k = np.arange(length, dtype=np.float64)[:, None]
    l = np.arange(length, dtype=np.float64)[None, :]
    mat = np.cos(np.pi * (2.0 * l + 1.0) * k / (2.0 * length))
    mat[0, :] *= np.sqrt(1.0 / length)
    mat[1:, :] *= np.sqrt(2.0 / length)
    return mat


def _require_rank3(z: np.ndarray, op: str) -> np.ndarray:
    arr = np.asarray(z, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError(f"{op} expects a rank-3 [C, L, V] array, got rank {arr.ndim}")
    return arr


def dct_temporal(z: np.ndarray) -> np.ndarray:
    """Forward transform along the temporal axis of a [C, L, V] latent."""
    arr = _require_rank3(z, "dct_temporal")
    mat = dct_matrix(arr.shape[1])
    return np.einsum("kl,clv->ckv", mat, arr)


def idct_temporal(spectrum: np.ndarray) -> np.ndarray:
    """Inverse transform; exact adjoint of :func:`dct_temporal`."""
    arr = _require_rank3(spectrum, "idct_temporal")
    mat = dct_matrix(arr.shape[1])
    return np.einsum("lk,ckv->clv", mat.T, arr)


# ---------------------------------------------------------------------------
# differentiable transform primitives (registered against the tensor tape)
# ---------------------------------------------------------------------------

def dct(x, axis: int = 1) -> Tensor:
    """Differentiable forward transform along ``axis``."""
    x = tensor.as_tensor(x)
    mat = dct_matrix(x.data.shape[axis])

    def fwd(arr: np.ndarray) -> np.ndarray:
        moved = np.moveaxis(arr, axis, -1)
        return np.moveaxis(moved @ mat.T, -1, axis)

    def vjp(g):
        moved = np.moveaxis(g, axis, -1)
        return (np.moveaxis(moved @ mat, -1, axis),)

    return tensor.node(fwd(x.data), (x,), vjp, "dct")


def idct(x, axis: int = 1) -> Tensor:
    """Differentiable inverse transform along ``axis``."""
    x = tensor.as_tensor(x)
    mat = dct_matrix(x.data.shape[axis])

    def vjp(g):
        moved = np.moveaxis(g, axis, -1)
        return (np.moveaxis(moved @ mat.T, -1, axis),)

    moved = np.moveaxis(x.data, axis, -1)
    out = np.moveaxis(moved @ mat, -1, axis)
    return tensor.node(out, (x,), vjp, "idct")


# ---------------------------------------------------------------------------
# semantic-gated residual gain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GainFilter:
    """Per-frequency residual gains: zero below the cutoff, flat above it."""

    length: int
    cutoff: int
    values: np.ndarray  # shape [length]
    alpha: float = 1.0


def build_gain(length: int, cutoff: int, s_hat: float, alpha: float = 1.0) -> GainFilter:
    """Gain vector G with G_k = 0 for k < cutoff and G_k = s_hat above.

    The low band is untouched by construction, which is what preserves
    topology; only detail frequencies are amplified.
    """
    if not 0 < cutoff <= length:
        raise ValueError(f"cutoff must satisfy 0 < M <= L, got M={cutoff}, L={length}")
    if not 0.0 <= s_hat <= 1.0:
        raise ValueError(f"intensity score must lie in [0, 1], got {s_hat}")
    values = np.zeros(length, dtype=np.float64)
    values[cutoff:] = s_hat
    return GainFilter(length=length, cutoff=cutoff, values=values, alpha=float(alpha))


def residual_scale(x, scaled_gain: np.ndarray, axis: int = 1):
    """x + IDCT(DCT(x) * scaled_gain) along ``axis``.

    Equivalent to filtering with (1 + scaled_gain), but exact: an all-zero
    gain returns the input object untouched, bitwise.  Accepts a Tensor or a
    plain array; ``scaled_gain`` must broadcast against the spectrum.
    """
    if not np.any(scaled_gain):
        return x
    if isinstance(x, Tensor):
        spec = dct(x, axis=axis)
        return x + idct(spec * scaled_gain, axis=axis)
    arr = np.asarray(x, dtype=np.float64)
    mat = dct_matrix(arr.shape[axis])
    moved = np.moveaxis(arr, axis, -1)
    spec = moved @ mat.T
    resid = (spec * np.moveaxis(scaled_gain, axis, -1)) @ mat
    return arr + np.moveaxis(resid, -1, axis)


def apply_spectral_residual(z, gain: GainFilter):
    """Amplify a latent's detail band: IDCT(DCT(z) * (1 + alpha*G)).

    Identity at alpha = 0 or an all-zero gain (exactly — the residual branch
    is skipped).  Works on [C, L, V] arrays and on rank-3 Tensors.
    """
    arr = z.data if isinstance(z, Tensor) else _require_rank3(z, "apply_spectral_residual")
    if arr.ndim != 3:
        raise ValueError(f"apply_spectral_residual expects rank 3, got rank {arr.ndim}")
    if arr.shape[1] != gain.length:
        raise ValueError(
            f"gain length {gain.length} does not match temporal axis {arr.shape[1]}"
        )
    scaled = (gain.alpha * gain.values)[None, :, None]
    return residual_scale(z, scaled, axis=1)


# ---------------------------------------------------------------------------
# band-energy diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BandEnergyReport:
    """Low/high spectral energy split of one latent at a given cutoff."""

    cutoff: int
    low: float
    high: float
    per_k: np.ndarray          # energy per frequency, summed over channels/joints
    freq_axis: np.ndarray      # normalized k / L

    def to_json(self) -> dict:
        return {
            "cutoff": self.cutoff,
            "low": self.low,
            "high": self.high,
            "per_k": [float(v) for v in self.per_k],
        }


def band_energy(z: np.ndarray, cutoff: int) -> BandEnergyReport:
    """Energy below/at-or-above the cutoff; Parseval ties the total to ||z||^2."""
    arr = _require_rank3(z, "band_energy")
    length = arr.shape[1]
    if not 0 < cutoff <= length:
        raise ValueError(f"cutoff must satisfy 0 < M <= L, got M={cutoff}, L={length}")
    spec = dct_temporal(arr)
    per_k = np.sum(spec * spec, axis=(0, 2))
    return BandEnergyReport(
        cutoff=cutoff,
        low=float(per_k[:cutoff].sum()),
        high=float(per_k[cutoff:].sum()),
        per_k=per_k,
        freq_axis=np.arange(length, dtype=np.float64) / length,
    )
