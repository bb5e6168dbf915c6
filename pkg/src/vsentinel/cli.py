"""``vsentinel`` command line.

Exit status: 0 on success, 1 on usage errors, 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .data.manifest import ManifestError, ingest_manifest, split_dataset, write_manifest
from .data.synth import generate_dataset
from .infer import infer_video
from .nn.model import BACKBONES, CELLS, ModelConfig
from .pipeline.frames import PPMError, iter_ppm_stream
from .pipeline.generator import MODES
from .stream import StreamSession
from .tensor import NonFiniteError
from .training.checkpoint import CheckpointError, describe_checkpoint, load_checkpoint
from .training.loop import TrainingDiverged, evaluate, train
from .training.matrix import run_matrix

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
RUNTIME_ERRORS = (OSError, ValueError, ManifestError, CheckpointError, PPMError, NonFiniteError,
                  TrainingDiverged, KeyError)

log = logging.getLogger("vsentinel")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _mode(value: str) -> str:
    aliases = {"single": "single_sequence", "single_sequence": "single_sequence", "sliding": "sliding"}
    if value not in aliases:
        raise argparse.ArgumentTypeError(f"mode must be single or sliding, got {value!r}")
    return aliases[value]


def _positive_float(value: str) -> float:
    v = float(value)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return v


def _threshold(value: str) -> float:
    v = float(value)
    if not 0 <= v <= 1:
        raise argparse.ArgumentTypeError(f"threshold must be in [0, 1], got {value}")
    return v


def resolve_seed(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("VSNT_SEED")
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"VSNT_SEED must be an integer, got {env!r}") from None


def _load_config(args) -> ModelConfig:
    cfg = ModelConfig.load(args.config) if getattr(args, "config", None) else ModelConfig()
    if getattr(args, "window_seconds", None) is not None:
        cfg = cfg.updated(window_seconds=args.window_seconds)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vsentinel", description="Video anomaly detection: training, evaluation and streaming.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, config=True, threshold=False, mode=False, window=False):
        p.add_argument("--seed", type=int, default=None, help="random seed (default: $VSNT_SEED or 0)")
        if config:
            p.add_argument("--config", type=Path, help="JSON file overriding ModelConfig fields")
        if threshold:
            p.add_argument("--threshold", type=_threshold, default=0.5)
        if mode:
            p.add_argument("--mode", type=_mode, default="single_sequence", help="single or sliding")
        if window:
            p.add_argument("--window-seconds", type=_positive_float, default=None)

    p = sub.add_parser("synth", help="generate a synthetic calm/agitated dataset")
    p.add_argument("out", type=Path)
    p.add_argument("--per-class", type=int, default=10)
    p.add_argument("--frames", type=int, default=64)
    p.add_argument("--side", type=int, default=32)
    p.add_argument("--fps", type=_positive_float, default=30.0)
    p.add_argument("--sprites", type=int, default=3)
    p.add_argument("--split", type=float, default=None, help="also write a train/test split at this ratio")
    common(p, config=False)

    p = sub.add_parser("split", help="write a stratified train/test split next to a manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("--ratio", type=float, default=0.6)
    common(p, config=False)

    p = sub.add_parser("train", help="train a model and write a checkpoint plus learning curves")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, required=True, help="checkpoint path")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--augment", action="store_true")
    p.add_argument("--curves", type=Path, default=None, help="curve CSV path (SVG written alongside)")
    common(p, mode=True, window=True)

    p = sub.add_parser("eval", help="evaluate a checkpoint on one split partition")
    p.add_argument("checkpoint", type=Path)
    p.add_argument("manifest", type=Path)
    p.add_argument("--partition", choices=("train", "test"), default="test")
    p.add_argument("--metrics", type=Path, default=None, help="write the metrics CSV here")
    common(p, config=False, threshold=True, mode=True, window=True)

    p = sub.add_parser("matrix", help="train and compare the backbone × cell × head grid")
    p.add_argument("manifest", type=Path)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--backbones", nargs="+", choices=BACKBONES, default=list(BACKBONES))
    p.add_argument("--cells", nargs="+", choices=CELLS, default=list(CELLS))
    p.add_argument("--csv", type=Path, default=None)
    common(p, threshold=True, mode=True, window=True)

    p = sub.add_parser("infer", help="run a checkpoint on a stored video or a live PPM stream")
    p.add_argument("checkpoint", type=Path)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--video", type=Path, help="frame directory")
    src.add_argument("--stream", help="PPM stream path, or - for stdin")
    p.add_argument("--fps", type=_positive_float, default=None, help="stream/video frame rate")
    p.add_argument("--emit-stride", type=int, default=None, help="frames between stream predictions")
    p.add_argument("--alert-log", type=Path, default=None, help="also append alerts to this file")
    p.add_argument("--sync", action="store_true", help="run stream inference inline (no frame dropping)")
    common(p, config=False, threshold=True, mode=True, window=True)
    p.set_defaults(mode="sliding")

    p = sub.add_parser("inspect-checkpoint", help="print a checkpoint's header and parameter table")
    p.add_argument("checkpoint", type=Path)
    return parser


# --- subcommands -------------------------------------------------------------------


def cmd_synth(args, out):
    seed = resolve_seed(args.seed)
    manifest = generate_dataset(args.out, args.per_class, args.frames, args.side, args.fps, seed, args.sprites)
    if args.split is not None:
        manifest = split_dataset(manifest, args.split, seed)
        write_manifest(manifest, args.out / "manifest.jsonl")
    print(f"wrote {len(manifest)} videos to {args.out / 'manifest.jsonl'}", file=out)


def cmd_split(args, out):
    manifest = split_dataset(ingest_manifest(args.manifest, check_frames=False), args.ratio, resolve_seed(args.seed))
    write_manifest(manifest, args.manifest)
    n_train = len(manifest.records_in("train"))
    print(f"train={n_train} test={len(manifest) - n_train}", file=out)


def cmd_train(args, out):
    cfg = _load_config(args)
    seed = resolve_seed(args.seed)
    manifest = ingest_manifest(args.manifest)
    progress = lambda row: print(
        f"epoch {row.epoch}: train_loss={row.train_loss:.4f} train_acc={row.train_acc:.3f} "
        f"val_loss={row.val_loss:.4f} val_acc={row.val_acc:.3f}", file=out, flush=True)
    result = train(cfg, manifest, args.epochs, seed, args.mode, args.augment, args.out, progress)
    curves = args.curves or args.out.with_suffix(".curve.csv")
    result.curve.write_csv(curves)
    result.curve.write_svg(curves.with_suffix(".svg"))
    print(f"checkpoint: {args.out}\ncurves: {curves}", file=out)


def cmd_eval(args, out):
    ckpt = load_checkpoint(args.checkpoint)
    model = ckpt.model
    if args.window_seconds is not None:
        model.cfg = model.cfg.updated(window_seconds=args.window_seconds)
    manifest = ingest_manifest(args.manifest)
    report = evaluate(model, manifest, args.partition, args.threshold, args.mode)
    print(report.summary(), file=out)
    metrics = args.metrics or args.checkpoint.with_suffix(".metrics.csv")
    row = {"config": f"{model.cfg.backbone}+{model.cfg.cell}" + ("+pred" if model.cfg.with_pred_head else ""),
           **report.as_row()}
    metrics.write_text(",".join(row) + "\n" + ",".join(str(v) for v in row.values()) + "\n")
    print(f"metrics: {metrics}", file=out)


def cmd_matrix(args, out):
    base = _load_config(args)
    manifest = ingest_manifest(args.manifest)
    result = run_matrix(base, manifest, args.backbones, args.cells, epochs=args.epochs,
                        seed=resolve_seed(args.seed), mode=args.mode, threshold=args.threshold)
    print(result.to_table(), end="", file=out)
    if args.csv:
        result.write_csv(args.csv)
        print(f"csv: {args.csv}", file=out)
    if len(result.failures) == len(result):
        raise RuntimeError("every configuration failed")


def _emit(alert, out, log_fh):
    line = alert.to_json()
    print(line, file=out, flush=True)
    if log_fh is not None:
        log_fh.write(line + "\n")
        log_fh.flush()


def cmd_infer(args, out):
    model = load_checkpoint(args.checkpoint).model
    log_fh = open(args.alert_log, "a") if args.alert_log else None
    try:
        if args.video is not None:
            records, summary = infer_video(model, args.video, args.mode, args.threshold,
                                           args.window_seconds, args.emit_stride, args.fps)
            for rec in records:
                _emit(rec, out, log_fh)
        else:
            if args.fps is None:
                raise UsageError("--stream needs --fps")
            session = StreamSession(model, args.fps, args.window_seconds, args.threshold, args.emit_stride,
                                    synchronous=args.sync, on_alert=lambda a: _emit(a, out, log_fh))
            stream = sys.stdin.buffer if args.stream == "-" else open(args.stream, "rb")
            try:
                for frame in iter_ppm_stream(stream):
                    session.push_frame(frame)
            finally:
                session.close()
                if stream is not sys.stdin.buffer:
                    stream.close()
            summary = session.summary()
    finally:
        if log_fh is not None:
            log_fh.close()
    print(json.dumps({"summary": summary}), file=sys.stderr)


def cmd_inspect(args, out):
    print(describe_checkpoint(load_checkpoint(args.checkpoint)), file=out)


COMMANDS = {
    "synth": cmd_synth,
    "split": cmd_split,
    "train": cmd_train,
    "eval": cmd_eval,
    "matrix": cmd_matrix,
    "infer": cmd_infer,
    "inspect-checkpoint": cmd_inspect,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    except (*RUNTIME_ERRORS, RuntimeError) as exc:
        print(f"vsentinel: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
