"""Experiment orchestration: benchmark assembly, the two training stages,
evaluation protocols, spectrum analysis and ablation sweeps.

Every run is reproducible from ``(config, master seed)`` alone.  Randomness
is split into named substreams (``classes``, ``dataset``, ``train-batch``,
``train-noise``, ...) so that changing e.g. the batch sampler never shifts
the noise draws of an otherwise identical run.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import losses, tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .classifier import InferenceConfig, Model, evaluate_accuracy
from .conditioning import (
    ActionClass,
    KinematicHead,
    class_condition,
    curriculum_prob,
    load_classes,
    sample_condition,
    train_head,
)
from .config import (
    DistillConfig,
    ExperimentConfig,
    apply_overrides,
    denoiser_config,
    fingerprint,
    resolve_master_seed,
)
from .denoiser import denoise_graph, effective_intensity, init_denoiser
from .diffusion import estimate_z0, forward_diffuse, make_schedule
from .losses import SpectralLossConfig
from .seeding import fnv1a64, substream
from .spectral import band_energy
from .synthdata import (
    Sample,
    assign_signatures,
    crop,
    downsample,
    export_dataset,
    generate_class_set,
    make_dataset,
    split_classes,
)

# Metrics rows hold learning dynamics only, so the persisted CSV is a pure
# function of (config, master seed); wall-clock timing goes to the log lines.
METRICS_HEADER = "iteration,l_diff,l_freq,l_total,lr,gamma"

_MASK63 = (1 << 63) - 1


@dataclass(frozen=True)
class Benchmark:
    """A fully materialised synthetic benchmark: classes, their spectral
    signatures, the seen/unseen split and both sample sets."""

    classes: list[ActionClass]
    signatures: dict
    seen_ids: list[int]
    unseen_ids: list[int]
    train_samples: list[Sample]
    test_samples: list[Sample]
    embed_seed: int

    def class_by_id(self, cid: int) -> ActionClass:
        for cls in self.classes:
            if cls.id == cid:
                return cls
        raise KeyError(f"no class with id {cid}")

    @property
    def seen_classes(self) -> list[ActionClass]:
        return [c for c in self.classes if c.id in set(self.seen_ids)]

    @property
    def unseen_classes(self) -> list[ActionClass]:
        return [c for c in self.classes if c.id in set(self.unseen_ids)]


@dataclass(frozen=True)
class TrainResult:
    config: ExperimentConfig
    params: tensor.ParameterSet
    head: KinematicHead
    schedule: object
    metrics: list[dict]
    benchmark: Benchmark
    distill_info: dict
    fixed_eps: np.ndarray | None = None


def embedding_seed(master_seed: int) -> int:
    """Text-embedding seed derived from the master seed; kept derivable so
    checkpoints only need to store the master seed."""
    return (int(master_seed) ^ fnv1a64("embedding")) & _MASK63


def build_benchmark(cfg: ExperimentConfig, master_seed: int | None = None) -> Benchmark:
    """Materialise classes, signatures, split and datasets for ``cfg``.

    When ``data.classes_file`` is set, the class roster (labels, descriptions,
    intensity bits) comes from that JSON file and only signatures plus the
    split are drawn; otherwise everything is synthesised.
    """
    seed = resolve_master_seed(cfg) if master_seed is None else int(master_seed)
    data = cfg.data
    class_rng = substream(seed, "classes")
    if data.classes_file is not None:
        classes = load_classes(data.classes_file)
        signatures = assign_signatures(
            classes,
            data.length,
            cfg.model.cutoff,
            data.joints,
            data.mode,
            class_rng,
            detail_amp=data.detail_amp,
        )
        seen_ids, unseen_ids = split_classes(classes, data.seen_fraction, class_rng)
    else:
        classes, signatures, seen_ids, unseen_ids = generate_class_set(
            data.num_classes,
            data.seen_fraction,
            data.length,
            cfg.model.cutoff,
            data.joints,
            data.mode,
            class_rng,
            high_fraction=data.high_fraction,
            n_desc=data.n_desc,
            detail_amp=data.detail_amp,
        )
    data_rng = substream(seed, "dataset")
    train_samples, test_samples = make_dataset(
        classes,
        signatures,
        seen_ids,
        unseen_ids,
        data.channels,
        data.length,
        data.joints,
        data.jitter,
        data.samples_per_class,
        data.eval_samples_per_class,
        data_rng,
    )
    return Benchmark(
        classes=classes,
        signatures=signatures,
        seen_ids=seen_ids,
        unseen_ids=unseen_ids,
        train_samples=train_samples,
        test_samples=test_samples,
        embed_seed=embedding_seed(seed),
    )


def run_distill(
    cfg: ExperimentConfig,
    benchmark: Benchmark | None = None,
    master_seed: int | None = None,
) -> tuple[KinematicHead, dict]:
    """Stage 1: fit the intensity head on the seen classes' embeddings."""
    seed = resolve_master_seed(cfg) if master_seed is None else int(master_seed)
    if benchmark is None:
        benchmark = build_benchmark(cfg, seed)
    init_rng = substream(seed, "distill-init")
    head, info = train_head(
        benchmark.seen_classes, cfg.distill, benchmark.embed_seed, init_rng
    )
    return head, info


def _metrics_rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_HEADER.split(","))
    for row in rows:
        writer.writerow(
            [
                row["iteration"],
                f"{row['l_diff']:.10g}",
                f"{row['l_freq']:.10g}",
                f"{row['l_total']:.10g}",
                f"{row['lr']:.10g}",
                f"{row['gamma']:.10g}",
            ]
        )
    return buf.getvalue()


def write_metrics(rows: list[dict], path: str | Path) -> None:
    Path(path).write_text(_metrics_rows_to_csv(rows))


def checkpoint_arrays(result: TrainResult) -> dict[str, np.ndarray]:
    """Flatten a trained model into the named-array dict stored on disk."""
    arrays: dict[str, np.ndarray] = {}
    for name, leaf in result.params.items():
        arrays[f"denoiser.{name}"] = leaf.data
    arrays.update(result.head.as_arrays())
    arrays["schedule.beta"] = result.schedule.beta
    arrays["schedule.alpha_bar"] = result.schedule.alpha_bar
    if result.fixed_eps is not None:
        # The reused noise draw goes into the checkpoint so a fixed-noise
        # run can be audited after the fact.
        arrays["train.fixed_eps"] = result.fixed_eps
    return arrays


def run_train(
    cfg: ExperimentConfig,
    head: KinematicHead | None = None,
    checkpoint_path: str | Path | None = None,
    metrics_path: str | Path | None = None,
    log: Callable[[str], None] | None = None,
) -> TrainResult:
    """Stage 2: train the denoiser with curriculum conditioning.

    The master seed (after any environment override) is frozen into the
    config recorded in the checkpoint, so downstream evaluation rebuilds the
    identical benchmark without consulting the environment again.
    """
    seed = resolve_master_seed(cfg)
    cfg = dataclasses.replace(cfg, master_seed=seed)
    train = cfg.train
    benchmark = build_benchmark(cfg, seed)
    distill_info: dict = {}
    if head is None:
        head, distill_info = run_distill(cfg, benchmark, seed)

    dcfg = denoiser_config(cfg)
    params = init_denoiser(dcfg, seed)
    schedule = make_schedule(train.timesteps, kind=train.schedule)
    loss_cfg = SpectralLossConfig(
        cutoff=cfg.model.cutoff, gamma=train.gamma, timesteps=train.timesteps
    )

    batch_rng = substream(seed, "train-batch")
    noise_rng = substream(seed, "train-noise")
    t_rng = substream(seed, "train-t")
    cur_rng = substream(seed, "train-curriculum")
    gate_rng = substream(seed, "train-gating")
    drop_rng = substream(seed, "train-drop")

    z0_all = np.stack([s.z0 for s in benchmark.train_samples])
    cls_ids = np.asarray([s.class_id for s in benchmark.train_samples])
    by_id = {c.id: c for c in benchmark.classes}
    n_train = len(benchmark.train_samples)
    if n_train == 0:
        raise ValueError("benchmark produced no training samples")

    # The intensity score is a per-class quantity read off the class's
    # canonical (rich-mean) embedding; the curriculum only varies the
    # condition vector fed to the modulation path.
    s_hat_by_class = {
        c.id: float(
            head.predict(
                class_condition(
                    c, "rich-mean", cfg.model.text_dim, benchmark.embed_seed
                )[None]
            )[0]
        )
        for c in benchmark.classes
    }

    fixed_eps = None
    if train.fixed_noise:
        fixed_eps = noise_rng.standard_normal(
            (cfg.data.channels, cfg.data.length, cfg.data.joints)
        )

    opt_state = tensor.adamw_init(
        params, lr=train.lr, weight_decay=train.weight_decay
    )
    metrics: list[dict] = []
    comps: dict[str, float] = {}
    started = time.perf_counter()

    for it in range(train.iterations):
        lr_t = tensor.cosine_lr(it, train.iterations, train.lr, warmup=train.warmup)
        if train.use_curriculum:
            rich_p = curriculum_prob(it, train.iterations, cfg.curriculum)
        else:
            rich_p = 0.0

        idx = batch_rng.integers(0, n_train, size=train.batch_size)
        z0 = z0_all[idx]
        t = t_rng.integers(1, train.timesteps + 1, size=train.batch_size)
        if fixed_eps is not None:
            eps = np.broadcast_to(fixed_eps, z0.shape).copy()
        else:
            eps = noise_rng.standard_normal(z0.shape)

        conds = np.empty((train.batch_size, cfg.model.text_dim))
        for row, sample_idx in enumerate(idx):
            vec, _ = sample_condition(
                by_id[int(cls_ids[sample_idx])],
                rich_p,
                cur_rng,
                cfg.model.text_dim,
                benchmark.embed_seed,
            )
            conds[row] = vec
        if train.cond_dropout > 0.0:
            dropped = drop_rng.random(train.batch_size) < train.cond_dropout
            conds[dropped] = 0.0
        s_hat = np.asarray(
            [s_hat_by_class[int(cls_ids[i])] for i in idx]
        )
        s_eff = effective_intensity(dcfg, s_hat, train.batch_size, gate_rng)
        z_t = forward_diffuse(z0, t, eps, schedule)

        def loss_fn(p: tensor.ParameterSet) -> tensor.Tensor:
            eps_hat = denoise_graph(dcfg, p, z_t, t, conds, s_eff)
            l_diff = losses.diffusion_loss(eps_hat, eps)
            if train.use_freq_loss:
                z0_hat = estimate_z0(z_t, eps_hat, t, schedule)
                l_freq = losses.spectral_loss(z0, z0_hat, t, loss_cfg)
            else:
                l_freq = 0.0
            total = losses.total_loss(l_diff, l_freq, train.lambda_freq)
            comps["l_diff"] = float(l_diff.data)
            comps["l_freq"] = float(l_freq.data) if train.use_freq_loss else 0.0
            comps["l_total"] = float(total.data)
            return total

        try:
            grads = tensor.grad(loss_fn, params)
        except tensor.NonFiniteError as exc:
            raise RuntimeError(
                f"training aborted at iteration {it}: {exc}"
            ) from exc
        params, opt_state = tensor.adamw_step(
            params, grads, opt_state.with_lr(lr_t)
        )

        last = it == train.iterations - 1
        if it % train.metrics_every == 0 or last:
            metrics.append(
                {
                    "iteration": it,
                    "l_diff": comps["l_diff"],
                    "l_freq": comps["l_freq"],
                    "l_total": comps["l_total"],
                    "lr": lr_t,
                    "gamma": rich_p,
                }
            )
            if log is not None and (it % max(train.metrics_every * 10, 1) == 0 or last):
                log(
                    f"iter {it:>6d}  l_total {comps['l_total']:.5f}  "
                    f"l_diff {comps['l_diff']:.5f}  l_freq {comps['l_freq']:.5f}  "
                    f"lr {lr_t:.2e}  rich_p {rich_p:.3f}  "
                    f"elapsed {time.perf_counter() - started:.1f}s"
                )

    result = TrainResult(
        config=cfg,
        params=params,
        head=head,
        schedule=schedule,
        metrics=metrics,
        benchmark=benchmark,
        distill_info=distill_info,
        fixed_eps=fixed_eps,
    )
    if metrics_path is not None:
        write_metrics(metrics, metrics_path)
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, cfg.to_dict(), checkpoint_arrays(result))
    return result


def load_model(path: str | Path) -> tuple[ExperimentConfig, Model, KinematicHead]:
    """Rebuild config, denoiser and head from a checkpoint file."""
    raw_cfg, arrays = load_checkpoint(path)
    cfg = ExperimentConfig.from_dict(raw_cfg)
    params = tensor.ParameterSet()
    head_arrays: dict[str, np.ndarray] = {}
    schedule_arrays: dict[str, np.ndarray] = {}
    for name, value in arrays.items():
        if name.startswith("denoiser."):
            params.add(name[len("denoiser.") :], value)
        elif name.startswith("head."):
            head_arrays[name] = value
        elif name.startswith("schedule."):
            schedule_arrays[name] = value
        elif name.startswith("train."):
            pass  # auxiliary training state (e.g. the fixed noise draw)
        else:
            raise ValueError(f"unrecognised checkpoint array '{name}'")
    if not params.names():
        raise ValueError(f"checkpoint {path} holds no denoiser parameters")
    head = KinematicHead.from_arrays(head_arrays)
    schedule = make_schedule(cfg.train.timesteps, kind=cfg.train.schedule)
    if "schedule.beta" in schedule_arrays and not np.array_equal(
        schedule_arrays["schedule.beta"], schedule.beta
    ):
        raise ValueError(
            "checkpoint noise schedule disagrees with its config; file corrupt?"
        )
    model = Model(
        config=denoiser_config(cfg),
        params=params,
        schedule=schedule,
        text_dim=cfg.model.text_dim,
        embed_seed=embedding_seed(cfg.master_seed),
    )
    return cfg, model, head


def save_head(path: str | Path, cfg: ExperimentConfig, head: KinematicHead) -> None:
    """Persist a fitted intensity head on its own (no denoiser arrays)."""
    save_checkpoint(path, cfg.to_dict(), head.as_arrays())


def load_head(path: str | Path) -> tuple[ExperimentConfig, KinematicHead]:
    raw_cfg, arrays = load_checkpoint(path)
    head_arrays = {k: v for k, v in arrays.items() if k.startswith("head.")}
    if not head_arrays:
        raise ValueError(f"checkpoint {path} holds no head parameters")
    return ExperimentConfig.from_dict(raw_cfg), KinematicHead.from_arrays(head_arrays)


def _apply_transforms(
    samples: list[Sample],
    crop_length: int | None,
    crop_random: bool,
    downsample_factor: int | None,
    rng: np.random.Generator,
) -> list[Sample]:
    out = []
    for s in samples:
        z0 = s.z0
        if crop_length is not None:
            z0 = crop(z0, crop_length, rng=rng if crop_random else None,
                      deterministic=not crop_random)
        if downsample_factor is not None:
            z0 = downsample(z0, downsample_factor)
        out.append(Sample(class_id=s.class_id, split=s.split, z0=z0))
    return out


def run_eval(
    checkpoint_path: str | Path,
    candidates: str | None = None,
    t_test: int | None = None,
    t_sweep: Sequence[int] | None = None,
    crop_length: int | None = None,
    crop_random: bool = False,
    downsample_factor: int | None = None,
) -> dict:
    """Diffusion-as-classifier evaluation of a checkpoint on its benchmark.

    Returns a JSON-ready report; with ``t_sweep`` the report carries one
    sub-report per noise level plus the sweep summary.
    """
    cfg, model, head = load_model(checkpoint_path)
    seed = resolve_master_seed(cfg)
    benchmark = build_benchmark(cfg, seed)
    inference = cfg.inference
    if candidates is not None:
        inference = dataclasses.replace(inference, candidates=candidates)
    if t_test is not None:
        inference = dataclasses.replace(inference, t_test=t_test)

    test_samples = benchmark.test_samples
    if crop_length is not None or downsample_factor is not None:
        transform_rng = substream(seed, "eval-transform")
        test_samples = _apply_transforms(
            test_samples, crop_length, crop_random, downsample_factor, transform_rng
        )

    if inference.candidates == "all":
        candidate_classes = benchmark.classes
    else:
        candidate_classes = benchmark.unseen_classes
    if not candidate_classes:
        raise ValueError("candidate set is empty; check the seen fraction")

    eval_seed = (seed ^ fnv1a64("eval")) & _MASK63

    def one(inf: InferenceConfig) -> dict:
        return evaluate_accuracy(
            model, head, test_samples, candidate_classes, inf, eval_seed
        )

    report: dict = {
        "fingerprint": fingerprint(cfg),
        "master_seed": seed,
        "protocol": inference.candidates,
        "num_candidates": len(candidate_classes),
        "num_test_samples": len(test_samples),
        "transforms": {
            "crop": crop_length,
            "crop_random": crop_random,
            "downsample": downsample_factor,
        },
    }
    if t_sweep is not None:
        sweep = []
        for t_val in t_sweep:
            sub = one(dataclasses.replace(inference, t_test=int(t_val)))
            sweep.append({"t_test": int(t_val), "accuracy": sub["accuracy"],
                          "report": sub})
        report["sweep"] = sweep
        report["accuracy_by_t"] = {str(s["t_test"]): s["accuracy"] for s in sweep}
        report["best_t"] = max(sweep, key=lambda s: s["accuracy"])["t_test"]
    else:
        sub = one(inference)
        report.update(sub)
    return report


def run_analyze_spectrum(checkpoint_path: str | Path) -> dict:
    """Band-energy comparison between ground-truth latents and one-step
    reconstructions at the inference noise level, averaged over the test set."""
    cfg, model, head = load_model(checkpoint_path)
    seed = resolve_master_seed(cfg)
    benchmark = build_benchmark(cfg, seed)
    samples = benchmark.test_samples
    if not samples:
        raise ValueError("benchmark has no test samples to analyse")
    inference = cfg.inference
    by_id = {c.id: c for c in benchmark.classes}

    z0 = np.stack([s.z0 for s in samples])
    rng = substream(seed, "spectrum")
    eps = rng.standard_normal(z0.shape)
    t = np.full(len(samples), inference.t_test, dtype=np.int64)
    z_t = forward_diffuse(z0, t, eps, model.schedule)

    conds = np.stack(
        [
            class_condition(
                by_id[s.class_id],
                inference.condition_source,
                model.text_dim,
                model.embed_seed,
            )
            for s in samples
        ]
    )
    s_hat = head.predict(conds)
    gate_rng = substream(seed, "spectrum-gating")
    s_eff = effective_intensity(model.config, s_hat, len(samples), gate_rng)
    eps_hat = denoise_graph(model.config, model.params, z_t, t, conds, s_eff).data
    z0_hat = estimate_z0(z_t, eps_hat, t, model.schedule)

    cutoff = model.config.cutoff
    gt_rows = [band_energy(z0[i], cutoff) for i in range(len(samples))]
    pred_rows = [band_energy(z0_hat[i], cutoff) for i in range(len(samples))]

    def summarise(rows) -> dict:
        per_k = np.mean([r.per_k for r in rows], axis=0)
        return {
            "per_k": [float(v) for v in per_k],
            "low": float(np.mean([r.low for r in rows])),
            "high": float(np.mean([r.high for r in rows])),
        }

    gt_high = np.asarray([r.high for r in gt_rows])
    pred_high = np.asarray([r.high for r in pred_rows])
    report = {
        "fingerprint": fingerprint(cfg),
        "t_test": inference.t_test,
        "cutoff": cutoff,
        "length": z0.shape[2],
        "freq_axis": [float(v) for v in gt_rows[0].freq_axis],
        "gt": summarise(gt_rows),
        "pred": summarise(pred_rows),
        "high_band_gap": float(np.mean(np.abs(pred_high - gt_high))),
        "num_samples": len(samples),
    }
    return report


def ablation_cells(preset: str, cfg: ExperimentConfig) -> list[dict]:
    """Named override sets for the stock ablation sweeps."""
    length = cfg.data.length
    if preset == "components":
        return [
            {"label": "full", "overrides": {}},
            {"label": "wo-srm", "overrides": {"train.use_srm": False}},
            {"label": "wo-freq-loss", "overrides": {"train.use_freq_loss": False}},
            {"label": "wo-curriculum", "overrides": {"train.use_curriculum": False}},
        ]
    if preset == "gating":
        return [
            {"label": f"gating-{mode}", "overrides": {"model.gating": mode}}
            for mode in ("predicted", "none", "uniform", "random")
        ]
    if preset == "schedules":
        return [
            {"label": f"curriculum-{kind}", "overrides": {"curriculum.kind": kind}}
            for kind in ("cosine", "linear", "step", "fixed")
        ]
    if preset == "cutoff":
        values = sorted({max(1, length // 8), max(1, length // 4), max(1, length // 2)})
        return [
            {"label": f"cutoff-{m}", "overrides": {"model.cutoff": m}} for m in values
        ]
    if preset == "noise":
        return [
            {"label": "noise-random", "overrides": {"train.fixed_noise": False}},
            {"label": "noise-fixed", "overrides": {"train.fixed_noise": True}},
        ]
    if preset == "strength":
        cells = [
            {"label": f"lambda-{v:g}", "overrides": {"train.lambda_freq": v}}
            for v in (0.5, 1.0, 5.0)
        ]
        cells += [
            {"label": f"alpha-{v:g}", "overrides": {"model.alpha": v}}
            for v in (0.5, 1.0, 1.5)
        ]
        return cells
    raise ValueError(
        "unknown ablation preset "
        f"'{preset}' (try components, gating, schedules, cutoff, noise, strength)"
    )


ABLATION_HEADER = "label,fingerprint,accuracy,error,overrides"


def run_ablation(
    cfg: ExperimentConfig,
    cells: list[dict],
    workdir: str | Path,
    log: Callable[[str], None] | None = None,
) -> list[dict]:
    """Train + evaluate one model per cell; a failing cell records its error
    and the sweep moves on."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    rows: list[dict] = []
    for cell in cells:
        label = cell["label"]
        overrides = dict(cell.get("overrides", {}))
        row = {"label": label, "fingerprint": "", "accuracy": "", "error": "",
               "overrides": json.dumps(overrides, sort_keys=True)}
        try:
            cell_cfg = apply_overrides(cfg, overrides)
            row["fingerprint"] = fingerprint(cell_cfg)
            ckpt = workdir / f"{label}.ckpt"
            run_train(cell_cfg, checkpoint_path=ckpt,
                      metrics_path=workdir / f"{label}.metrics.csv", log=log)
            report = run_eval(ckpt)
            row["accuracy"] = f"{report['accuracy']:.6f}"
            if log is not None:
                log(f"cell {label}: accuracy {report['accuracy']:.4f}")
        except Exception as exc:  # noqa: BLE001 - sweep must survive bad cells
            row["error"] = f"{type(exc).__name__}: {exc}"
            if log is not None:
                log(f"cell {label}: FAILED ({row['error']})")
        rows.append(row)
    return rows


def write_ablation_csv(rows: list[dict], path: str | Path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ABLATION_HEADER.split(","))
    for row in rows:
        writer.writerow(
            [row["label"], row["fingerprint"], row["accuracy"], row["error"],
             row["overrides"]]
        )
    Path(path).write_text(buf.getvalue())


def export_data(cfg: ExperimentConfig, path: str | Path) -> dict:
    """Write the benchmark's train+test samples as JSON lines."""
    seed = resolve_master_seed(cfg)
    benchmark = build_benchmark(cfg, seed)
    export_dataset(benchmark.train_samples + benchmark.test_samples, path)
    return {
        "path": str(path),
        "train": len(benchmark.train_samples),
        "test": len(benchmark.test_samples),
        "seen_ids": benchmark.seen_ids,
        "unseen_ids": benchmark.unseen_ids,
    }
