"""Synthetic skeleton-latent benchmark with controlled spectral structure.

Samples are exact sums of temporal cosine basis functions plus Gaussian
jitter, so every sample's frequency support is known in closed form.  In
``freq-only`` mode all classes share one low-band template and differ only
through disjoint detail-band signatures — low-band statistics carry zero
class information by construction.  ``mixed`` mode gives every class its own
low band as well.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .conditioning import ActionClass

_MODES = ("freq-only", "mixed")


@dataclass(frozen=True)
class ClassSignature:
    """Spectral recipe for one class; high band is empty unless dynamic."""

    class_id: int
    low_freqs: np.ndarray   # int frequencies k < cutoff
    low_amps: np.ndarray    # [n_low]
    high_freqs: np.ndarray  # int frequencies k >= cutoff (may be empty)
    high_amps: np.ndarray   # [n_high, joints]
    intensity: int          # 0 static, 1 dynamic


@dataclass(frozen=True)
class Sample:
    class_id: int
    split: str  # "seen" | "unseen"
    z0: np.ndarray


def _cos_basis(length: int, k: int) -> np.ndarray:
    l = np.arange(length, dtype=np.float64)
    return np.cos(np.pi * (2.0 * l + 1.0) * k / (2.0 * length))


def _draw_low_band(rng: np.random.Generator, cutoff: int) -> tuple[np.ndarray, np.ndarray]:
    freqs = np.arange(cutoff, dtype=np.int64)
    amps = rng.uniform(0.5, 1.1, size=cutoff) * rng.choice([-1.0, 1.0], size=cutoff)
    return freqs, amps


def _draw_high_amps(
    rng: np.random.Generator, n_freqs: int, joints: int, scale: float
) -> np.ndarray:
    return scale * rng.uniform(0.45, 0.95, size=(n_freqs, joints)) * rng.choice(
        [-1.0, 1.0], size=(n_freqs, joints)
    )


def assign_signatures(
    classes: list[ActionClass],
    length: int,
    cutoff: int,
    joints: int,
    mode: str,
    rng: np.random.Generator,
    detail_amp: float = 1.0,
) -> dict[int, ClassSignature]:
    """Draw a spectral signature for every class, in ascending id order.

    Detail-band frequencies are handed out without replacement so signatures
    stay disjoint; the pool reshuffles only if a large class set exhausts it.
    In ``freq-only`` mode one low-band template is shared by everyone.
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got '{mode}'")
    if not 0 < cutoff < length:
        raise ValueError(f"cutoff must satisfy 0 < M < L, got M={cutoff}, L={length}")
    shared_low = _draw_low_band(rng, cutoff) if mode == "freq-only" else None
    num_dynamic = sum(c.s_gt for c in classes)
    n_high = max(1, min(3, (length - cutoff) // max(num_dynamic, 1)))
    pool: list[int] = []
    signatures: dict[int, ClassSignature] = {}
    for cls in sorted(classes, key=lambda c: c.id):
        if shared_low is not None:
            low_freqs, low_amps = shared_low
        else:
            low_freqs, low_amps = _draw_low_band(rng, cutoff)
        if cls.s_gt == 1:
            picked: list[int] = []
            while len(picked) < n_high:
                if not pool:
                    pool = list(range(cutoff, length))
                    rng.shuffle(pool)
                picked.append(pool.pop())
            high_freqs = np.asarray(sorted(picked), dtype=np.int64)
            high_amps = _draw_high_amps(rng, n_high, joints, detail_amp)
        else:
            high_freqs = np.asarray([], dtype=np.int64)
            high_amps = np.zeros((0, joints))
        signatures[cls.id] = ClassSignature(
            class_id=cls.id,
            low_freqs=np.array(low_freqs, dtype=np.int64),
            low_amps=np.array(low_amps, dtype=np.float64),
            high_freqs=high_freqs,
            high_amps=high_amps,
            intensity=int(cls.s_gt),
        )
    return signatures


def split_classes(
    classes: list[ActionClass], seen_fraction: float, rng: np.random.Generator
) -> tuple[list[int], list[int]]:
    """Seen/unseen split; the unseen side alternates intensities when both
    exist, because static classes are only separable from each other by
    intensity."""
    if not 0.0 <= seen_fraction <= 1.0:
        raise ValueError(f"seen fraction must lie in [0, 1], got {seen_fraction}")
    num_unseen = len(classes) - int(round(len(classes) * seen_fraction))
    dynamic_ids = [c.id for c in classes if c.s_gt == 1]
    static_ids = [c.id for c in classes if c.s_gt == 0]
    rng.shuffle(dynamic_ids)
    rng.shuffle(static_ids)
    unseen: list[int] = []
    take_dynamic = True
    while len(unseen) < num_unseen:
        source = dynamic_ids if (take_dynamic and dynamic_ids) else static_ids
        if not source:
            source = dynamic_ids or static_ids
        unseen.append(source.pop())
        take_dynamic = not take_dynamic
    unseen_ids = sorted(unseen)
    seen_ids = sorted(c.id for c in classes if c.id not in set(unseen_ids))
    return seen_ids, unseen_ids


def generate_class_set(
    num_classes: int,
    seen_fraction: float,
    length: int,
    cutoff: int,
    joints: int,
    mode: str,
    rng: np.random.Generator,
    high_fraction: float = 0.55,
    n_desc: int = 5,
    detail_amp: float = 1.0,
) -> tuple[list[ActionClass], dict[int, ClassSignature], list[int], list[int]]:
    """Build classes, spectral signatures and the seen/unseen split."""
    if num_classes < 1:
        raise ValueError(f"need at least one class, got {num_classes}")
    intensities = (rng.random(num_classes) < high_fraction).astype(np.int64)
    classes: list[ActionClass] = []
    for cid in range(num_classes):
        label = f"action-{cid:03d}"
        descriptions = tuple(f"{label} narrative variant {j}" for j in range(n_desc))
        classes.append(
            ActionClass(
                id=cid,
                label=label,
                rich_descriptions=descriptions,
                s_gt=int(intensities[cid]),
            )
        )
    signatures = assign_signatures(classes, length, cutoff, joints, mode, rng, detail_amp)
    seen_ids, unseen_ids = split_classes(classes, seen_fraction, rng)
    return classes, signatures, seen_ids, unseen_ids


def synth_sample(
    signature: ClassSignature,
    channels: int,
    length: int,
    joints: int,
    jitter: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """One latent [C, L, V]: low template + intensity-gated detail cosines
    plus iid Gaussian jitter of scale ``jitter``."""
    if jitter < 0.0:
        raise ValueError(f"jitter must be non-negative, got {jitter}")
    base = np.zeros((length, joints))
    for k, amp in zip(signature.low_freqs, signature.low_amps):
        base += amp * _cos_basis(length, int(k))[:, None]
    z0 = np.broadcast_to(base[None, :, :], (channels, length, joints)).copy()
    if signature.intensity == 1:
        # Each sample realizes the detail components with an independent
        # polarity per channel: the class fixes which frequencies carry
        # energy and how much, not the waveform itself.  Flipping signs
        # keeps the DCT support and energy of the component unchanged.
        signs = rng.choice(
            [-1.0, 1.0], size=(len(signature.high_freqs), channels)
        )
        for row, k in enumerate(signature.high_freqs):
            z0 += (
                signs[row][:, None, None]
                * signature.high_amps[row][None, None, :]
                * _cos_basis(length, int(k))[None, :, None]
            )
    if jitter > 0.0:
        z0 += jitter * rng.standard_normal((channels, length, joints))
    return z0


def make_dataset(
    classes: list[ActionClass],
    signatures: dict[int, ClassSignature],
    seen_ids: list[int],
    unseen_ids: list[int],
    channels: int,
    length: int,
    joints: int,
    jitter: float,
    samples_per_class: int,
    eval_samples_per_class: int,
    rng: np.random.Generator,
) -> tuple[list[Sample], list[Sample]]:
    """Training samples from seen classes, evaluation samples from unseen."""
    train: list[Sample] = []
    for cid in sorted(seen_ids):
        for _ in range(samples_per_class):
            z0 = synth_sample(signatures[cid], channels, length, joints, jitter, rng)
            train.append(Sample(class_id=cid, split="seen", z0=z0))
    test: list[Sample] = []
    for cid in sorted(unseen_ids):
        for _ in range(eval_samples_per_class):
            z0 = synth_sample(signatures[cid], channels, length, joints, jitter, rng)
            test.append(Sample(class_id=cid, split="unseen", z0=z0))
    return train, test


# ---------------------------------------------------------------------------
# robustness transforms
# ---------------------------------------------------------------------------

def crop(
    z0: np.ndarray,
    new_length: int,
    rng: np.random.Generator | None = None,
    deterministic: bool = False,
) -> np.ndarray:
    """Contiguous temporal window of ``new_length`` frames.

    The start is uniform unless ``deterministic`` pins it to zero.  A
    full-length crop returns the input unchanged (and draws nothing).
    """
    z0 = np.asarray(z0)
    length = z0.shape[1]
    if not 1 <= new_length <= length:
        raise ValueError(f"crop length must lie in [1, {length}], got {new_length}")
    if new_length == length:
        return z0
    if deterministic:
        start = 0
    else:
        if rng is None:
            raise ValueError("random crop needs an rng (or set deterministic=True)")
        start = int(rng.integers(0, length - new_length + 1))
    return z0[:, start : start + new_length, :].copy()


def downsample(z0: np.ndarray, factor: int) -> np.ndarray:
    """Keep every ``factor``-th frame starting at frame zero."""
    z0 = np.asarray(z0)
    length = z0.shape[1]
    if factor < 1:
        raise ValueError(f"downsample factor must be >= 1, got {factor}")
    if length % factor != 0:
        raise ValueError(f"length {length} is not divisible by factor {factor}")
    if factor == 1:
        return z0
    return z0[:, ::factor, :].copy()


# ---------------------------------------------------------------------------
# dataset export / import
# ---------------------------------------------------------------------------

def export_dataset(samples: list[Sample], path: str | Path) -> None:
    """Write samples as JSON lines: {class_id, split, z0 (nested lists)}."""
    with open(path, "w") as fh:
        for s in samples:
            fh.write(
                json.dumps(
                    {"class_id": s.class_id, "split": s.split, "z0": s.z0.tolist()},
                    sort_keys=True,
                )
                + "\n"
            )


def import_dataset(path: str | Path) -> list[Sample]:
    samples = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            samples.append(
                Sample(
                    class_id=int(rec["class_id"]),
                    split=str(rec["split"]),
                    z0=np.asarray(rec["z0"], dtype=np.float64),
                )
            )
    return samples
