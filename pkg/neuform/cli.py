from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from . import __version__
from .audio import write_wav
from .config import RunConfig
from .core import (
    Synthesizer,
    System,
    Utterance,
    analyze_entry,
    analyze_many,
    parallel_map,
)
from .errors import ConfigError, NeuformError, NumericError
from .evaluate import (
    DEFAULT_FACTORS,
    evaluate_copy,
    manipulation_sweep,
    read_report,
    write_report,
)
from .manifest import Manifest, read_manifest
from .mapper import (
    init_model,
    load_checkpoint,
    prepare_dataset,
    read_loss_curve,
    save_checkpoint,
    train,
    write_loss_curve,
)
from .models import CONTINUOUS, NormStats, Parameter, Split
from .params import (
    ManipulationSpec,
    compute_norm_stats,
    manipulate,
    read_norm_stats,
    read_params_csv,
    write_norm_stats,
    write_params_csv,
)
from .plotting import (
    plot_copy_reports,
    plot_loss_curve,
    plot_params,
    plot_sweep,
    save_figure,
)
from .synth import make_corpus
from .vocoder import export_mel

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    """Raised for invalid command lines."""


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def exit_code(exc: BaseException) -> int:
    """Maps an exception to the command-line exit code."""
    if isinstance(exc, (UsageError, ConfigError, ValidationError)):
        return EXIT_USAGE
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    if isinstance(exc, (NeuformError, OSError, ValueError)):
        return EXIT_DATA
    raise exc


def load_config(args: argparse.Namespace) -> RunConfig:
    """The run config from `--config` with command-line overrides applied."""
    config = RunConfig.from_json_file(args.config) if args.config else RunConfig()
    overrides: dict[str, Any] = {
        "jobs": args.jobs,
        "seed": args.seed,
        "train.seed": args.seed,
        "mapper.seed": args.seed,
        "analysis.voice": getattr(args, "voice", None),
        "train.max_updates": getattr(args, "max_updates", None),
        "train.batch_size": getattr(args, "batch_size", None),
        "train.threads": getattr(args, "threads", None),
        "griffinlim.n_iters": getattr(args, "n_iters", None),
    }
    if getattr(args, "no_trim", False):
        overrides["trim_silence"] = False
    return config.with_overrides(overrides)


def _analyze_split(
    manifest: Manifest, split: Split, config: RunConfig
) -> list[Utterance]:
    entries = manifest.by_split(split)
    results = parallel_map(
        lambda entry: analyze_entry(manifest, entry, config), entries, config.jobs
    )
    utterances = []
    for entry, result in zip(entries, results):
        if isinstance(result, Exception):
            logger.warning(f"Skipping {entry.utterance_id}: {result}")
            continue
        utterances.append(result)
    if entries and not utterances:
        raise NeuformError(f"Every {split.value} utterance failed analysis.")
    return utterances


def _load_model(args: argparse.Namespace, config: RunConfig):
    if args.checkpoint is None:
        return None
    return load_checkpoint(args.checkpoint, expected=config.mapper)


def cmd_analyze(args: argparse.Namespace) -> int:
    if not args.audio:
        raise UsageError("analyze: expected at least one audio file")
    config = load_config(args)
    out_dir = Path(args.out_dir or config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config.echo(out_dir)

    failures = {}
    for path, result in zip(args.audio, analyze_many(args.audio, config)):
        if isinstance(result, Exception):
            failures[str(path)] = result
            logger.error(f"{path}: {result}")
            continue
        stem = out_dir / result.utterance_id
        write_params_csv(result.params, stem.with_suffix(".csv"))
        export_mel(stem.with_suffix(".nfmel"), result.mel)
        print(f"{path} -> {stem}.csv, {stem}.nfmel")
    if failures:
        print(f"{len(failures)} of {len(args.audio)} files failed:", file=sys.stderr)
        for path, exc in failures.items():
            print(f"  {path}: {exc}", file=sys.stderr)
        return max(exit_code(exc) for exc in failures.values())
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = load_config(args)
    manifest = read_manifest(args.manifest)
    if not manifest.by_split(Split.TRAIN):
        raise NeuformError(f"Manifest {args.manifest} has no train rows.")
    out = Path(args.out or Path(config.output_dir) / "model.nfckpt")
    out_dir = out.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    config.echo(out_dir)

    train_utterances = _analyze_split(manifest, Split.TRAIN, config)
    val_utterances = _analyze_split(manifest, Split.VAL, config)
    stats = compute_norm_stats(
        [u.params for u in train_utterances], [u.mel for u in train_utterances]
    )
    write_norm_stats(stats, out_dir / "norm_stats.json")

    model = init_model(
        config.mapper,
        stats=stats,
        frame=config.analysis.frame,
        mel=config.analysis.mel,
    )
    dataset = prepare_dataset(
        [u.params for u in train_utterances], [u.mel for u in train_utterances], stats
    )
    val_dataset = None
    if val_utterances:
        val_dataset = prepare_dataset(
            [u.params for u in val_utterances], [u.mel for u in val_utterances], stats
        )
    checkpoint_dir = out_dir / "checkpoints" if config.train.checkpoint_every else None
    result = train(dataset, config.train, model, val_dataset, checkpoint_dir)
    save_checkpoint(result.model, out)
    write_loss_curve(out_dir / "loss.csv", result.losses, result.val_losses)
    print(f"Trained {result.model!r}; final loss {result.losses[-1]:.4f} -> {out}")
    return EXIT_OK


def _render(
    args: argparse.Namespace, config: RunConfig, spec: ManipulationSpec | None
) -> int:
    model = _load_model(args, config)
    synthesizer = Synthesizer(model, config, args.system)
    utterance = analyze_many([args.audio], config)[0]
    if isinstance(utterance, Exception):
        raise utterance
    params = utterance.params
    if spec is not None:
        params = manipulate(params, spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    config.echo(out.parent)
    if args.backend == "export":
        export_mel(out, synthesizer.params_to_mel(params, utterance.mel))
    else:
        write_wav(out, synthesizer.synthesize(params, utterance.mel))
    print(f"{args.audio} -> {out}")
    return EXIT_OK


def cmd_resynth(args: argparse.Namespace) -> int:
    return _render(args, load_config(args), None)


def cmd_manipulate(args: argparse.Namespace) -> int:
    try:
        spec = ManipulationSpec.from_flags(args.scale or (), args.scale_f0)
    except ValueError as exc:
        raise UsageError(f"manipulate: {exc}")
    if spec.is_empty:
        raise UsageError("manipulate: expected --scale or --scale-f0")
    return _render(args, load_config(args), spec)


def _evaluation_stats(
    args: argparse.Namespace, config: RunConfig, model, manifest: Manifest
) -> NormStats:
    if args.stats:
        return read_norm_stats(args.stats)
    if model is not None and model.stats is not None:
        return model.stats
    train_utterances = _analyze_split(manifest, Split.TRAIN, config)
    if not train_utterances:
        raise NeuformError(
            "Normalization stats need --stats, a checkpoint or train rows."
        )
    return compute_norm_stats([u.params for u in train_utterances])


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = load_config(args)
    manifest = read_manifest(args.manifest)
    if not manifest.by_split(Split.TEST):
        raise NeuformError(f"Manifest {args.manifest} has no test rows.")
    model = _load_model(args, config)
    synthesizer = Synthesizer(model, config, args.system)
    stats = _evaluation_stats(args, config, model, manifest)
    utterances = _analyze_split(manifest, Split.TEST, config)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    config.echo(out.parent)
    failures: dict[str, Any]
    if args.mode == "copy":
        report, errors = evaluate_copy(
            utterances, synthesizer.roundtrip, stats, config.jobs
        )
        failures = {uid: str(exc) for uid, exc in errors.items()}
    else:
        parameters = args.parameters or [p.value for p in CONTINUOUS]
        report = manipulation_sweep(
            utterances,
            args.factors or DEFAULT_FACTORS,
            synthesizer.roundtrip,
            stats,
            [Parameter.parse(p) for p in parameters],
            nyquist=config.analysis.frame.sample_rate / 2,
            lpc=config.analysis.lpc,
            jobs=config.jobs,
        )
        failures = {
            f"{name} x {factor}": failed
            for (name, factor), failed in report.failures.items()
        }
    write_report(report, out, args.format)
    if failures:
        failures_path = out.with_name(f"{out.stem}_failures.json")
        failures_path.write_text(json.dumps(failures, indent=2))
        logger.warning(f"Some utterances failed; see {failures_path}.")
    print(f"Wrote {args.mode} report of {len(utterances)} utterances -> {out}")
    return EXIT_OK


def cmd_synth_corpus(args: argparse.Namespace) -> int:
    config = load_config(args)
    out_dir = Path(args.out_dir or config.output_dir)
    manifest = make_corpus(
        args.n,
        out_dir,
        seed=config.seed,
        n_speakers=args.speakers,
        sample_rate=config.analysis.frame.sample_rate,
        ratios=tuple(args.ratios),
    )
    config.echo(out_dir)
    print(f"Wrote {manifest!r} -> {out_dir / 'manifest.csv'}")
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    if args.kind == "copy":
        labels = args.labels or [Path(p).stem for p in args.inputs]
        if len(labels) != len(args.inputs):
            raise UsageError("plot: expected one label per report")
        figure = plot_copy_reports(
            {label: read_report(p) for label, p in zip(labels, args.inputs)}
        )
    elif len(args.inputs) != 1:
        raise UsageError(f"plot {args.kind}: expected exactly one input")
    elif args.kind == "sweep":
        figure = plot_sweep(read_report(args.inputs[0]))
    elif args.kind == "params":
        figure = plot_params(read_params_csv(args.inputs[0]))
    else:
        figure = plot_loss_curve(*read_loss_curve(args.inputs[0]))
    save_figure(figure, args.out)
    print(f"-> {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run config")
    common.add_argument("--jobs", type=int, help="utterance-level workers")
    common.add_argument("--seed", type=int, help="seed of every random choice")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")

    voice = _ArgumentParser(add_help=False)
    voice.add_argument("--voice", choices=["auto", "low", "high"])
    voice.add_argument(
        "--no-trim", action="store_true", help="keep leading/trailing silence"
    )

    render = _ArgumentParser(add_help=False)
    render.add_argument("audio", type=Path, help="input WAV")
    render.add_argument("--checkpoint", type=Path, help="NFCKPT1 mapper checkpoint")
    render.add_argument("--out", type=Path, required=True, help="output WAV or mel")
    render.add_argument(
        "--backend", choices=["griffinlim", "export"], default="griffinlim"
    )
    render.add_argument(
        "--system", choices=[s.value for s in System if s is not System.IDENTITY],
        default="nf",
    )
    render.add_argument("--n-iters", type=int, help="Griffin-Lim iterations")

    parser = _ArgumentParser(
        prog="neuform",
        description="Speech parameter analysis, manipulation and resynthesis",
    )
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)

    analyze = commands.add_parser(
        "analyze", parents=[common, voice], help="extract parameters and mel"
    )
    analyze.add_argument("audio", nargs="*", type=Path)
    analyze.add_argument("--out-dir", type=Path)
    analyze.set_defaults(handler=cmd_analyze)

    train_parser = commands.add_parser(
        "train", parents=[common, voice], help="train the mapper"
    )
    train_parser.add_argument("manifest", type=Path)
    train_parser.add_argument("--out", type=Path, help="checkpoint path")
    train_parser.add_argument("--max-updates", type=int)
    train_parser.add_argument("--batch-size", type=int)
    train_parser.add_argument(
        "--threads", type=int, help="BLAS threads; 1 gives reproducible runs"
    )
    train_parser.set_defaults(handler=cmd_train)

    resynth = commands.add_parser(
        "resynth", parents=[common, voice, render], help="copy synthesis"
    )
    resynth.set_defaults(handler=cmd_resynth)

    manipulate_parser = commands.add_parser(
        "manipulate", parents=[common, voice, render], help="scale parameters"
    )
    manipulate_parser.add_argument(
        "--scale", action="append", metavar="NAME=FACTOR", help="e.g. f1=1.2"
    )
    manipulate_parser.add_argument("--scale-f0", type=float, metavar="FACTOR")
    manipulate_parser.set_defaults(handler=cmd_manipulate)

    evaluate = commands.add_parser(
        "evaluate", parents=[common, voice], help="copy-synthesis or sweep report"
    )
    evaluate.add_argument("manifest", type=Path)
    evaluate.add_argument("--checkpoint", type=Path)
    evaluate.add_argument("--stats", type=Path, help="normalization stats JSON")
    evaluate.add_argument("--mode", choices=["copy", "sweep"], default="copy")
    evaluate.add_argument(
        "--system", choices=[s.value for s in System], default="nf"
    )
    evaluate.add_argument("--factors", type=float, nargs="+")
    evaluate.add_argument("--parameters", nargs="+")
    evaluate.add_argument("--out", type=Path, required=True)
    evaluate.add_argument("--format", choices=["csv", "json"], default="csv")
    evaluate.add_argument("--n-iters", type=int, help="Griffin-Lim iterations")
    evaluate.set_defaults(handler=cmd_evaluate)

    corpus = commands.add_parser(
        "synth-corpus", parents=[common], help="write a synthetic vowel corpus"
    )
    corpus.add_argument("--n", type=int, default=200, help="utterances")
    corpus.add_argument("--speakers", type=int)
    corpus.add_argument(
        "--ratios", type=float, nargs=3, default=(0.8, 0.1, 0.1),
        metavar=("TRAIN", "VAL", "TEST"),
    )
    corpus.add_argument("--out-dir", type=Path)
    corpus.set_defaults(handler=cmd_synth_corpus)

    plot = commands.add_parser("plot", parents=[common], help="plot results")
    plot.add_argument("kind", choices=["copy", "sweep", "params", "loss"])
    plot.add_argument("inputs", nargs="+", type=Path)
    plot.add_argument("--labels", nargs="+")
    plot.add_argument("--out", type=Path, required=True)
    plot.set_defaults(handler=cmd_plot)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Runs the `neuform` command line.

    Args:
        argv: Arguments without the program name. Defaults to `sys.argv[1:]`.

    Returns:
        int: 0 on success, 1 for usage or configuration errors, 2 for data
        errors and 3 for numeric failures.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE

    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s", force=True)

    try:
        return args.handler(args)
    except Exception as exc:
        code = exit_code(exc)
        print(f"neuform {args.command}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
