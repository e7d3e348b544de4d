"""Zero-shot classification by scoring candidate conditions against noise.

One test latent is noised once at a fixed step; each candidate class is then
asked to predict that noise under its own condition embedding and intensity
gate.  The candidate whose prediction lands closest (Euclidean distance,
averaged over a handful of deterministic noise draws) wins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conditioning import ActionClass, KinematicHead, class_condition, predict_intensity
from .denoiser import DenoiserConfig, denoise_graph, effective_intensity
from .diffusion import NoiseSchedule, forward_diffuse
from .seeding import fnv1a64
from .synthdata import Sample
from .tensor import ParameterSet

_DECISIONS = ("mean-distance", "vote")
_SOURCES = ("rich-mean", "sparse", "neutral")
_PROTOCOLS = ("unseen", "all")


@dataclass(frozen=True)
class InferenceConfig:
    t_test: int = 25
    num_noise_seeds: int = 10
    decision: str = "mean-distance"
    condition_source: str = "rich-mean"
    candidates: str = "unseen"  # which classes form the candidate set

    def __post_init__(self):
        if self.t_test < 1:
            raise ValueError(f"t_test must be >= 1, got {self.t_test}")
        if self.num_noise_seeds < 1:
            raise ValueError(f"need at least one noise draw, got {self.num_noise_seeds}")
        if self.decision not in _DECISIONS:
            raise ValueError(f"decision must be one of {_DECISIONS}, got '{self.decision}'")
        if self.condition_source not in _SOURCES:
            raise ValueError(
                f"condition source must be one of {_SOURCES}, got '{self.condition_source}'"
            )
        if self.candidates not in _PROTOCOLS:
            raise ValueError(
                f"candidate protocol must be one of {_PROTOCOLS}, got '{self.candidates}'"
            )


@dataclass(frozen=True)
class Model:
    """A trained denoiser plus everything needed to condition it."""

    config: DenoiserConfig
    params: ParameterSet
    schedule: NoiseSchedule
    text_dim: int
    embed_seed: int


def _rng_for(seed, label: str) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        entropy = list(np.atleast_1d(seed.entropy)) + [fnv1a64(label)]
        return np.random.default_rng(np.random.SeedSequence(entropy))
    return np.random.default_rng(np.random.SeedSequence([int(seed), fnv1a64(label)]))


def score_candidate(
    model: Model,
    head: KinematicHead,
    z0_u: np.ndarray,
    candidate: ActionClass,
    eps_test: np.ndarray,
    cfg: InferenceConfig,
    rng: np.random.Generator | None = None,
) -> float:
    """Euclidean distance between the injected and the predicted noise when
    the denoiser is conditioned on ``candidate``."""
    z0_u = np.asarray(z0_u, dtype=np.float64)
    eps_test = np.asarray(eps_test, dtype=np.float64)
    if eps_test.shape != z0_u.shape:
        raise ValueError(
            f"noise shape {eps_test.shape} does not match latent shape {z0_u.shape}"
        )
    if cfg.t_test > model.schedule.timesteps:
        raise ValueError(
            f"t_test {cfg.t_test} exceeds schedule horizon {model.schedule.timesteps}"
        )
    d = class_condition(candidate, cfg.condition_source, model.text_dim, model.embed_seed)
    # Intensity always reads off the canonical rich-mean embedding.
    canon = class_condition(candidate, "rich-mean", model.text_dim, model.embed_seed)
    s_hat = predict_intensity(head, canon)
    z_t = forward_diffuse(z0_u, cfg.t_test, eps_test, model.schedule)
    s_eff = effective_intensity(model.config, s_hat, 1, rng)
    eps_hat = denoise_graph(
        model.config,
        model.params,
        z_t[None],
        np.asarray([cfg.t_test]),
        d[None],
        s_eff,
    ).data[0]
    return float(np.linalg.norm((eps_test - eps_hat).ravel()))


def _candidate_distances(
    model: Model,
    head: KinematicHead,
    z0_u: np.ndarray,
    candidates: list[ActionClass],
    cfg: InferenceConfig,
    seed,
) -> tuple[list[int], np.ndarray]:
    """Distances [num_draws, num_candidates] for id-sorted candidates.

    Candidates are scored in canonical id order inside one batched forward
    pass per call, so the result cannot depend on the caller's ordering.
    """
    if not candidates:
        raise ValueError("candidate set is empty")
    ids = [c.id for c in candidates]
    if len(set(ids)) != len(ids):
        raise ValueError("candidate ids must be unique")
    ordered = sorted(candidates, key=lambda c: c.id)
    z0_u = np.asarray(z0_u, dtype=np.float64)

    conds = np.stack(
        [
            class_condition(c, cfg.condition_source, model.text_dim, model.embed_seed)
            for c in ordered
        ]
    )
    # Intensity is a per-class quantity and always reads off the canonical
    # rich-mean embedding, independent of which condition vector is fed to
    # the modulation path.
    canon = np.stack(
        [
            class_condition(c, "rich-mean", model.text_dim, model.embed_seed)
            for c in ordered
        ]
    )
    s_hat = head.predict(canon)

    noise_rng = _rng_for(seed, "classify-noise")
    gate_rng = _rng_for(seed, "classify-gating")
    k = len(ordered)
    draws = [noise_rng.standard_normal(z0_u.shape) for _ in range(cfg.num_noise_seeds)]

    z_rows = []
    t_rows = []
    d_rows = []
    s_rows = []
    for eps in draws:
        z_t = forward_diffuse(z0_u, cfg.t_test, eps, model.schedule)
        for j in range(k):
            z_rows.append(z_t)
            t_rows.append(cfg.t_test)
            d_rows.append(conds[j])
            s_rows.append(s_hat[j])
    s_eff = effective_intensity(
        model.config, np.asarray(s_rows), len(s_rows), gate_rng
    )
    eps_hat = denoise_graph(
        model.config,
        model.params,
        np.stack(z_rows),
        np.asarray(t_rows),
        np.stack(d_rows),
        s_eff,
    ).data

    distances = np.empty((cfg.num_noise_seeds, k))
    row = 0
    for i, eps in enumerate(draws):
        for j in range(k):
            distances[i, j] = np.linalg.norm((eps - eps_hat[row]).ravel())
            row += 1
    return [c.id for c in ordered], distances


def classify(
    model: Model,
    head: KinematicHead,
    z0_u: np.ndarray,
    candidates: list[ActionClass],
    cfg: InferenceConfig,
    seed,
) -> int:
    """Predicted class id; ties always break toward the lowest id."""
    ids, distances = _candidate_distances(model, head, z0_u, candidates, cfg, seed)
    if cfg.decision == "vote":
        votes = np.zeros(len(ids), dtype=np.int64)
        for row in distances:
            votes[int(np.argmin(row))] += 1
        best = votes.max()
        return min(ids[j] for j in range(len(ids)) if votes[j] == best)
    mean = distances.mean(axis=0)
    best = mean.min()
    return min(ids[j] for j in range(len(ids)) if mean[j] == best)


def evaluate_accuracy(
    model: Model,
    head: KinematicHead,
    test_samples: list[Sample],
    candidates: list[ActionClass],
    cfg: InferenceConfig,
    seed: int,
) -> dict:
    """Top-1 accuracy and a confusion matrix over the candidate set.

    Report keys: accuracy, per_class, confusion (rows true, columns
    predicted, both in ascending id order), t_test, seeds.
    """
    if not test_samples:
        raise ValueError("test set is empty")
    ids = sorted(c.id for c in candidates)
    index = {cid: i for i, cid in enumerate(ids)}
    for s in test_samples:
        if s.class_id not in index:
            raise ValueError(
                f"test sample class {s.class_id} is not in the candidate set {ids}"
            )
    confusion = np.zeros((len(ids), len(ids)), dtype=np.int64)
    for i, s in enumerate(test_samples):
        child = np.random.SeedSequence([int(seed), fnv1a64("evaluate"), i])
        pred = classify(model, head, s.z0, candidates, cfg, child)
        confusion[index[s.class_id], index[pred]] += 1
    correct = int(np.trace(confusion))
    per_class = {}
    for cid in ids:
        row = confusion[index[cid]]
        total = int(row.sum())
        if total > 0:
            per_class[str(cid)] = float(row[index[cid]] / total)
    return {
        "accuracy": float(correct / len(test_samples)),
        "per_class": per_class,
        "confusion": confusion.tolist(),
        "t_test": cfg.t_test,
        "seeds": cfg.num_noise_seeds,
        "candidates": ids,
    }
