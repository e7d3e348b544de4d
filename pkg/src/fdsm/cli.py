"""Command-line front end.

Verbs mirror the library's harness functions: ``distill``, ``train``,
``eval``, ``analyze-spectrum``, ``ablate`` and ``gen-data-export``.  Every verb
accepts ``--config config.json`` plus kebab-case override flags for the
common knobs; flags win over the file.  Report-producing verbs render a
figure next to each CSV/JSON artefact unless ``--no-figures`` is given.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ExperimentConfig, apply_overrides, fingerprint, load_config
from . import harness

_CHOICE = {
    "data.mode": ("freq-only", "mixed"),
    "model.gating": ("predicted", "none", "uniform", "random"),
    "train.schedule": ("linear", "cosine"),
    "curriculum.kind": ("cosine", "linear", "step", "fixed"),
    "inference.decision": ("mean-distance", "vote"),
    "inference.condition_source": ("rich-mean", "sparse"),
    "inference.candidates": ("unseen", "all"),
}

# flag, dotted config path, value type
_VALUE_FLAGS = [
    ("--master-seed", "master_seed", int),
    ("--num-classes", "data.num_classes", int),
    ("--seen-fraction", "data.seen_fraction", float),
    ("--channels", "data.channels", int),
    ("--length", "data.length", int),
    ("--joints", "data.joints", int),
    ("--data-mode", "data.mode", str),
    ("--jitter", "data.jitter", float),
    ("--samples-per-class", "data.samples_per_class", int),
    ("--eval-samples-per-class", "data.eval_samples_per_class", int),
    ("--classes-file", "data.classes_file", str),
    ("--depth", "model.depth", int),
    ("--model-dim", "model.model_dim", int),
    ("--heads", "model.heads", int),
    ("--text-dim", "model.text_dim", int),
    ("--cutoff", "model.cutoff", int),
    ("--alpha", "model.alpha", float),
    ("--gating", "model.gating", str),
    ("--iterations", "train.iterations", int),
    ("--batch-size", "train.batch_size", int),
    ("--lr", "train.lr", float),
    ("--weight-decay", "train.weight_decay", float),
    ("--warmup", "train.warmup", int),
    ("--timesteps", "train.timesteps", int),
    ("--beta-schedule", "train.schedule", str),
    ("--lambda-freq", "train.lambda_freq", float),
    ("--gamma", "train.gamma", float),
    ("--cond-dropout", "train.cond_dropout", float),
    ("--metrics-every", "train.metrics_every", int),
    ("--curriculum-kind", "curriculum.kind", str),
    ("--fixed-p", "curriculum.fixed_p", float),
    ("--step-interval", "curriculum.step_interval", int),
    ("--t-test", "inference.t_test", int),
    ("--num-noise-seeds", "inference.num_noise_seeds", int),
    ("--decision", "inference.decision", str),
    ("--condition-source", "inference.condition_source", str),
    ("--candidates", "inference.candidates", str),
    ("--distill-epochs", "distill.epochs", int),
    ("--distill-lr", "distill.lr", float),
    ("--distill-hidden", "distill.hidden", int),
]

# flag, dotted config path (Boolean pairs: --srm / --no-srm)
_BOOL_FLAGS = [
    ("--srm", "train.use_srm"),
    ("--freq-loss", "train.use_freq_loss"),
    ("--curriculum", "train.use_curriculum"),
    ("--fixed-noise", "train.fixed_noise"),
]


def _dest(flag: str) -> str:
    return flag.lstrip("-").replace("-", "_")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON experiment config (defaults apply otherwise)")
    for flag, path, typ in _VALUE_FLAGS:
        parser.add_argument(flag, dest=_dest(flag), type=typ, default=None,
                            choices=_CHOICE.get(path), help=f"override {path}")
    for flag, path in _BOOL_FLAGS:
        parser.add_argument(flag, dest=_dest(flag), default=None,
                            action=argparse.BooleanOptionalAction,
                            help=f"override {path}")


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for flag, path, _ in _VALUE_FLAGS:
        value = getattr(args, _dest(flag))
        if value is not None:
            overrides[path] = value
    for flag, path in _BOOL_FLAGS:
        value = getattr(args, _dest(flag))
        if value is not None:
            overrides[path] = value
    return apply_overrides(cfg, overrides) if overrides else cfg


def _add_figures_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--figures", default=True,
                        action=argparse.BooleanOptionalAction,
                        help="render PNGs next to the run's outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdsm",
        description="Frequency-aware diffusion models on synthetic motion latents.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("distill", help="stage 1: fit the intensity head")
    _add_config_flags(p)
    p.add_argument("--out", type=Path, default=None,
                   help="write the fitted head as a checkpoint")
    p.add_argument("--report", type=Path, default=None,
                   help="write the fit summary as JSON")

    p = sub.add_parser("train", help="stage 2: train the denoiser")
    _add_config_flags(p)
    p.add_argument("--out", type=Path, default=Path("model.ckpt"))
    p.add_argument("--metrics", type=Path, default=None,
                   help="metrics CSV path (default: <out>.metrics.csv)")
    p.add_argument("--head", type=Path, default=None,
                   help="reuse a head checkpoint from `fdsm distill`")
    _add_figures_flag(p)

    p = sub.add_parser("eval", help="classify held-out samples by denoising error")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None,
                   help="report JSON path (default: <checkpoint>.eval.json)")
    p.add_argument("--candidates", choices=("unseen", "all"), default=None)
    p.add_argument("--t-test", type=int, default=None)
    p.add_argument("--t-sweep", type=str, default=None,
                   help="comma-separated timesteps, e.g. 10,20,25,30")
    p.add_argument("--crop", type=int, default=None,
                   help="crop test latents to this length before scoring")
    p.add_argument("--crop-random", action="store_true",
                   help="random crop windows instead of leading windows")
    p.add_argument("--downsample", type=int, default=None,
                   help="keep every n-th frame of the test latents")
    _add_figures_flag(p)

    p = sub.add_parser("analyze-spectrum",
                       help="band-energy report for one-step reconstructions")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None,
                   help="report JSON path (default: <checkpoint>.spectrum.json)")
    _add_figures_flag(p)

    p = sub.add_parser("ablate", help="train/evaluate a sweep of config cells")
    _add_config_flags(p)
    p.add_argument("--preset", default=None,
                   choices=("components", "gating", "schedules", "cutoff",
                            "noise", "strength"))
    p.add_argument("--cells", type=Path, default=None,
                   help="JSON list of {label, overrides} cells")
    p.add_argument("--out", type=Path, default=Path("ablation.csv"))
    p.add_argument("--workdir", type=Path, default=None,
                   help="cell checkpoints directory (default: <out>-runs)")
    _add_figures_flag(p)

    p = sub.add_parser("gen-data-export", help="write the benchmark as JSON lines")
    _add_config_flags(p)
    p.add_argument("--out", type=Path, default=Path("dataset.jsonl"))

    return parser


def _echo(msg: str) -> None:
    print(msg, flush=True)


def _cmd_distill(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    head, info = harness.run_distill(cfg)
    _echo(f"head fitted on {info['examples']} embeddings: "
          f"loss {info['loss']:.5f}, train accuracy {info['train_accuracy']:.4f}")
    if args.out is not None:
        harness.save_head(args.out, cfg, head)
        _echo(f"head checkpoint: {args.out}")
    if args.report is not None:
        args.report.write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
        _echo(f"report: {args.report}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    head = None
    if args.head is not None:
        _, head = harness.load_head(args.head)
    metrics_path = args.metrics
    if metrics_path is None:
        metrics_path = args.out.with_suffix(args.out.suffix + ".metrics.csv") \
            if args.out.suffix != ".ckpt" else args.out.with_suffix(".metrics.csv")
    _echo(f"training config {fingerprint(cfg)} "
          f"({cfg.train.iterations} iterations, batch {cfg.train.batch_size})")
    result = harness.run_train(cfg, head=head, checkpoint_path=args.out,
                               metrics_path=metrics_path, log=_echo)
    _echo(f"checkpoint: {args.out}")
    _echo(f"metrics: {metrics_path}")
    if args.figures:
        from . import figures

        fig_path = Path(metrics_path).with_suffix(".png")
        figures.save_metrics_figure(result.metrics, fig_path)
        _echo(f"figure: {fig_path}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    t_sweep = None
    if args.t_sweep:
        t_sweep = [int(v) for v in args.t_sweep.split(",") if v.strip()]
    report = harness.run_eval(
        args.checkpoint,
        candidates=args.candidates,
        t_test=args.t_test,
        t_sweep=t_sweep,
        crop_length=args.crop,
        crop_random=args.crop_random,
        downsample_factor=args.downsample,
    )
    out = args.out or args.checkpoint.with_suffix(".eval.json")
    out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if t_sweep is not None:
        by_t = ", ".join(f"t={s['t_test']}: {s['accuracy']:.4f}"
                         for s in report["sweep"])
        _echo(f"accuracy sweep ({report['num_candidates']}-way): {by_t}")
    else:
        _echo(f"accuracy {report['accuracy']:.4f} "
              f"({report['num_candidates']}-way, t={report['t_test']})")
    _echo(f"report: {out}")
    if args.figures:
        from . import figures

        fig_path = out.with_suffix(".png")
        if t_sweep is not None:
            figures.save_sweep_figure(report, fig_path)
        else:
            figures.save_confusion_figure(report, fig_path)
        _echo(f"figure: {fig_path}")
    return 0


def _cmd_analyze_spectrum(args: argparse.Namespace) -> int:
    report = harness.run_analyze_spectrum(args.checkpoint)
    out = args.out or args.checkpoint.with_suffix(".spectrum.json")
    out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _echo(f"high-band energy gap {report['high_band_gap']:.5f} "
          f"over {report['num_samples']} samples at t={report['t_test']}")
    _echo(f"report: {out}")
    if args.figures:
        from . import figures

        fig_path = out.with_suffix(".png")
        figures.save_spectrum_figure(report, fig_path)
        _echo(f"figure: {fig_path}")
    return 0


def _cmd_ablate(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    if (args.preset is None) == (args.cells is None):
        _echo("ablate needs exactly one of --preset or --cells")
        return 2
    if args.preset is not None:
        cells = harness.ablation_cells(args.preset, cfg)
    else:
        cells = json.loads(args.cells.read_text())
        if not isinstance(cells, list):
            _echo(f"{args.cells} must hold a JSON list of cells")
            return 2
    workdir = args.workdir or args.out.with_suffix("").with_name(
        args.out.stem + "-runs")
    rows = harness.run_ablation(cfg, cells, workdir, log=_echo)
    harness.write_ablation_csv(rows, args.out)
    _echo(f"table: {args.out}")
    if args.figures:
        from . import figures

        fig_path = args.out.with_suffix(".png")
        try:
            figures.save_ablation_figure(rows, fig_path)
            _echo(f"figure: {fig_path}")
        except ValueError as exc:
            _echo(f"figure skipped: {exc}")
    failed = [r["label"] for r in rows if r["error"]]
    if failed:
        _echo(f"{len(failed)} cell(s) failed: {', '.join(failed)}")
    return 0


def _cmd_gen_data_export(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    info = harness.export_data(cfg, args.out)
    _echo(f"wrote {info['train']} train + {info['test']} test samples to "
          f"{info['path']} (unseen classes: {info['unseen_ids']})")
    return 0


_COMMANDS = {
    "distill": _cmd_distill,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "analyze-spectrum": _cmd_analyze_spectrum,
    "ablate": _cmd_ablate,
    "gen-data-export": _cmd_gen_data_export,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.verb](args)


if __name__ == "__main__":
    sys.exit(main())
