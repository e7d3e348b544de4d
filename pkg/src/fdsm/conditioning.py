"""Text-conditioning stand-ins, the intensity projection head, and the
rich-to-sparse curriculum.

Real text encoders are deliberately out of scope: tokens map to fixed unit
vectors seeded by a stable hash, and rich descriptions additionally carry
the class's motion-intensity bit along one shared axis so that intensity is
recoverable from semantics at desk scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import losses, tensor
from .seeding import fnv1a64
from .tensor import ParameterSet, adamw_init, adamw_step

KINEMATIC_AXIS_TOKEN = "##kinematic-axis##"
_MASK64 = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class ActionClass:
    """One action category: label, rich descriptions, intensity bit."""

    id: int
    label: str
    rich_descriptions: tuple[str, ...]
    s_gt: int

    def __post_init__(self):
        if self.s_gt not in (0, 1):
            raise ValueError(f"s_gt must be 0 or 1, got {self.s_gt}")


def load_classes(path: str | Path) -> list[ActionClass]:
    """Read class definitions from a JSON list of {id, label,
    rich_descriptions, s_gt} records (hand-written or generated elsewhere)."""
    records = json.loads(Path(path).read_text())
    classes = [
        ActionClass(
            id=int(r["id"]),
            label=str(r["label"]),
            rich_descriptions=tuple(str(d) for d in r["rich_descriptions"]),
            s_gt=int(r["s_gt"]),
        )
        for r in records
    ]
    ids = [c.id for c in classes]
    if len(set(ids)) != len(ids):
        raise ValueError("class ids must be unique")
    return classes


def embed_text(token: str, dim: int, global_seed: int) -> np.ndarray:
    """Deterministic unit-norm stand-in embedding for a token or phrase."""
    if dim < 1:
        raise ValueError(f"embedding dim must be positive, got {dim}")
    seed = (fnv1a64(token) ^ (int(global_seed) & _MASK64)) & _MASK64
    vec = np.random.default_rng(seed).standard_normal(dim)
    return vec / np.linalg.norm(vec)


def kinematic_axis(dim: int, global_seed: int) -> np.ndarray:
    """The shared direction along which rich embeddings encode intensity."""
    return embed_text(KINEMATIC_AXIS_TOKEN, dim, global_seed)


def embed_rich(label: str, description: str, s_gt: int, dim: int, global_seed: int) -> np.ndarray:
    """Rich embedding: label + 0.5*description + 0.5*s_gt along the shared
    kinematic axis, re-normalized."""
    if s_gt not in (0, 1):
        raise ValueError(f"s_gt must be 0 or 1, got {s_gt}")
    vec = (
        embed_text(label, dim, global_seed)
        + 0.5 * embed_text(description, dim, global_seed)
        + 0.5 * s_gt * kinematic_axis(dim, global_seed)
    )
    return vec / np.linalg.norm(vec)


def class_condition(cls: ActionClass, source: str, dim: int, global_seed: int) -> np.ndarray:
    """The embedding used to condition on a class at inference time.

    ``rich-mean`` averages the class's rich-description embeddings (the
    class-level side information), ``sparse`` is the bare label vector, and
    ``neutral`` is the zero vector: the candidate then acts on the denoiser
    only through its predicted intensity gate, which is useful when the
    candidate embedding itself would sit far outside the training
    distribution (unseen classes).
    """
    if source == "neutral":
        return np.zeros(dim)
    if source == "sparse":
        return embed_text(cls.label, dim, global_seed)
    if source == "rich-mean":
        if not cls.rich_descriptions:
            raise ValueError(f"class {cls.id} has no rich descriptions")
        stack = np.stack(
            [embed_rich(cls.label, d, cls.s_gt, dim, global_seed) for d in cls.rich_descriptions]
        )
        vec = stack.mean(axis=0)
        return vec / np.linalg.norm(vec)
    raise ValueError(f"unknown condition source '{source}'")


# ---------------------------------------------------------------------------
# intensity projection head
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KinematicHead:
    """Two-layer MLP mapping an embedding to an intensity score in (0, 1)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def predict(self, embeddings: np.ndarray) -> np.ndarray:
        """Vectorized scores for an [N, d] batch (or a single [d] vector)."""
        single = embeddings.ndim == 1
        x = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
        hidden = np.maximum(x @ self.w1 + self.b1, 0.0)
        logits = (hidden @ self.w2 + self.b2).reshape(-1)
        out = 1.0 / (1.0 + np.exp(-logits))
        return out[0] if single else out

    def as_arrays(self) -> dict[str, np.ndarray]:
        return {"head.w1": self.w1, "head.b1": self.b1, "head.w2": self.w2, "head.b2": self.b2}

    @staticmethod
    def from_arrays(arrays: dict[str, np.ndarray]) -> "KinematicHead":
        return KinematicHead(
            w1=arrays["head.w1"], b1=arrays["head.b1"],
            w2=arrays["head.w2"], b2=arrays["head.b2"],
        )


def init_head(text_dim: int, hidden: int, rng: np.random.Generator) -> KinematicHead:
    return KinematicHead(
        w1=rng.normal(0.0, 0.02, size=(text_dim, hidden)),
        b1=np.zeros(hidden),
        w2=rng.normal(0.0, 0.02, size=(hidden, 1)),
        b2=np.zeros(1),
    )


def predict_intensity(head: KinematicHead, embedding: np.ndarray) -> float:
    """Scalar intensity score for one embedding."""
    return float(head.predict(np.asarray(embedding, dtype=np.float64)))


@dataclass(frozen=True)
class DistillConfig:
    text_dim: int = 64
    hidden: int = 256
    epochs: int = 500
    lr: float = 1e-3
    augment: int = 128


def _head_params(head: KinematicHead) -> ParameterSet:
    return ParameterSet({"w1": head.w1, "b1": head.b1, "w2": head.w2, "b2": head.b2})


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _virtual_rows(
    count: int, dim: int, axis: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Synthetic description embeddings with known intensity bits.

    Rows reproduce the two geometries the head meets in practice — a single
    rich description and a mean over several — but around fresh random label
    directions, so the intensity axis is the only feature that explains
    their targets.  Intensities alternate, keeping the virtual set balanced.
    """
    rows = np.empty((count, dim))
    targets = np.empty(count)
    for i in range(count):
        s = i % 2
        label_dir = _unit(rng.standard_normal(dim))
        if i % 4 < 2:
            desc = _unit(rng.standard_normal(dim))
        else:
            desc = np.mean(
                [_unit(rng.standard_normal(dim)) for _ in range(5)], axis=0
            )
        rows[i] = _unit(label_dir + 0.5 * desc + 0.5 * s * axis)
        targets[i] = float(s)
    return rows, targets


def train_head(
    classes: list[ActionClass],
    cfg: DistillConfig,
    embed_seed: int,
    init_rng: np.random.Generator,
) -> tuple[KinematicHead, dict]:
    """Distill intensity bits into the head from the classes' rich
    description embeddings, full-batch BCE.

    With only a handful of classes the head could reach zero loss by
    memorising label directions instead of reading the intensity axis, which
    would make it useless on classes it never saw.  ``cfg.augment`` virtual
    rows (fresh label directions, known intensities) remove that shortcut;
    see ``_virtual_rows``.

    Returns the trained head and a summary with the final loss and the
    training accuracy over the real class embeddings.
    """
    if not classes:
        raise ValueError("class list is empty")
    rows: list[np.ndarray] = []
    targets: list[float] = []
    for cls in classes:
        for desc in cls.rich_descriptions:
            rows.append(embed_rich(cls.label, desc, cls.s_gt, cfg.text_dim, embed_seed))
            targets.append(float(cls.s_gt))
    x_real = np.stack(rows)
    y_real = np.asarray(targets)
    if cfg.augment > 0:
        axis = kinematic_axis(cfg.text_dim, embed_seed)
        x_virt, y_virt = _virtual_rows(cfg.augment, cfg.text_dim, axis, init_rng)
        x = np.concatenate([x_real, x_virt])
        y = np.concatenate([y_real, y_virt])
    else:
        x, y = x_real, y_real

    def loss_fn(params: ParameterSet):
        hidden = tensor.relu(tensor.matmul(x, params["w1"]) + params["b1"])
        logits = tensor.reshape(tensor.matmul(hidden, params["w2"]) + params["b2"], (-1,))
        return losses.bce_distill_loss(tensor.sigmoid(logits), y)

    params = _head_params(init_head(cfg.text_dim, cfg.hidden, init_rng))
    state = adamw_init(params, lr=cfg.lr, weight_decay=0.0)
    for _ in range(cfg.epochs):
        grads = tensor.grad(loss_fn, params)
        params, state = adamw_step(params, grads, state)
    final_loss = float(loss_fn(params))

    arrays = params.arrays()
    head = KinematicHead(w1=arrays["w1"], b1=arrays["b1"], w2=arrays["w2"], b2=arrays["b2"])
    accuracy = float(np.mean((head.predict(x_real) > 0.5) == (y_real > 0.5)))
    return head, {
        "loss": final_loss,
        "train_accuracy": accuracy,
        "examples": len(y_real),
        "augmented": int(cfg.augment),
    }


# ---------------------------------------------------------------------------
# curriculum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CurriculumConfig:
    kind: str = "cosine"          # cosine | linear | step | fixed
    fixed_p: float = 0.5
    step_interval: int | None = None  # default: a fifth of the horizon

    def __post_init__(self):
        if self.kind not in ("cosine", "linear", "step", "fixed"):
            raise ValueError(f"unknown curriculum kind '{self.kind}'")
        if not 0.0 <= self.fixed_p <= 1.0:
            raise ValueError(f"fixed_p must lie in [0, 1], got {self.fixed_p}")


def curriculum_prob(e: int, e_total: int, cfg: CurriculumConfig) -> float:
    """Probability of sampling a rich description at iteration ``e``."""
    if e_total < 1:
        raise ValueError(f"horizon must be positive, got {e_total}")
    if not 0 <= e <= e_total:
        raise ValueError(f"iteration {e} outside [0, {e_total}]")
    if cfg.kind == "cosine":
        return 0.5 * (1.0 + math.cos(e * math.pi / e_total))
    if cfg.kind == "linear":
        return 1.0 - e / e_total
    if cfg.kind == "step":
        interval = cfg.step_interval if cfg.step_interval is not None else e_total / 5.0
        if interval <= 0:
            raise ValueError(f"step interval must be positive, got {interval}")
        return 0.5 ** math.floor(e / interval)
    return cfg.fixed_p


def sample_condition(
    cls: ActionClass,
    rich_prob: float,
    rng: np.random.Generator,
    dim: int,
    global_seed: int,
) -> tuple[np.ndarray, str]:
    """Draw the conditioning embedding for one training example.

    With probability ``rich_prob`` a rich description is chosen uniformly;
    otherwise the sparse label embedding is used.
    """
    if not 0.0 <= rich_prob <= 1.0:
        raise ValueError(f"rich probability must lie in [0, 1], got {rich_prob}")
    if rng.random() < rich_prob:
        idx = int(rng.integers(len(cls.rich_descriptions)))
        desc = cls.rich_descriptions[idx]
        return embed_rich(cls.label, desc, cls.s_gt, dim, global_seed), "rich"
    return embed_text(cls.label, dim, global_seed), "sparse"
