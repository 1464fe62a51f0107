"""Command line interface: synth, train, translate, evaluate.

Exit codes: 0 success, 2 configuration problem (message names the offending
key or value), 3 training diverged to a non-finite loss, 4 input/output
problem, 5 checkpoint problem (damaged file, wrong format version, or
incompatible configuration).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .core import (
    ArityError,
    Chan2ChanError,
    ConfigMismatch,
    CorruptFile,
    CropTooLarge,
    Direction,
    DiskError,
    Domain,
    EmptyDirectory,
    InsufficientArea,
    MixedDimensions,
    NaNLoss,
    NonContiguousIndices,
    SequenceTooShort,
    ShiftTooLarge,
    TauTooSmall,
    TrainConfig,
    UnsupportedBitDepth,
    VersionMismatch,
)
from .ingest import (
    align_time_shift,
    dataset_manifest,
    extract_patches,
    load_sequence,
    write_manifest,
    write_sequence,
)
from .metrics import evaluate_sequences
from .synthetic import (THRESHOLD_LEVEL, TRANSFORMS, SynthConfig,
                        derive_target_video, gen_source_video)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NAN = 3
EXIT_IO = 4
EXIT_CHECKPOINT = 5

CHECKPOINT_ERRORS = (CorruptFile, VersionMismatch, ConfigMismatch)
IO_ERRORS = (EmptyDirectory, MixedDimensions, UnsupportedBitDepth,
             NonContiguousIndices, DiskError, FileNotFoundError,
             NotADirectoryError, IsADirectoryError, PermissionError)
CONFIG_ERRORS = (ValueError, TauTooSmall, CropTooLarge, InsufficientArea,
                 SequenceTooShort, ShiftTooLarge, ArityError)

# TrainConfig fields exposed as flags; (flag, type, help showing the default)
_TRAIN_FLAGS = [
    ("tau", int, "causal window length in frames (default: 3)"),
    ("shift", int, "frames by which the target channel lags the source (default: 0)"),
    ("lambda_s", float, "weight of the spatial L1 terms (default: 100)"),
    ("lambda_t", float, "weight of the temporal MSE terms (default: 10)"),
    ("learning_rate", float, "Adam learning rate (default: 2e-4)"),
    ("batch_size", int, "windows per step (default: 8)"),
    ("steps", int, "optimization steps (default: 2000)"),
    ("crop_size", int, "square crop side in pixels (default: 128)"),
    ("seed", int, "seed for init and data order (default: 0)"),
    ("output_mode", str, "inference mode, spatial or averaged (default: averaged)"),
    ("gen_depth", int, "U-Net depth (default: 7)"),
    ("gen_width", int, "U-Net base width (default: 64)"),
    ("disc_width", int, "discriminator base width (default: 64)"),
    ("disc_strided", int, "strided discriminator layers (default: 3)"),
    ("checkpoint_every", int, "steps between checkpoints (default: 500)"),
]


def _fail(msg: str):
    print(f"error: {msg}", file=sys.stderr)


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        n_blobs=args.n_blobs, blob_sigma=args.blob_sigma,
        velocity_range=args.velocity_range, frame_size=args.frame_size,
        T=args.frames, lag=args.lag, transform=args.transform,
        strength=args.strength, noise_sigma=args.noise_sigma, seed=args.seed,
        threshold_level=args.threshold_level,
    )
    out = Path(args.out)
    u_seq = gen_source_video(cfg)
    v_seq = derive_target_video(u_seq, cfg)
    write_sequence(u_seq, out / "u", bit_depth=args.bit_depth, fmt=args.format)
    write_sequence(v_seq, out / "v", bit_depth=args.bit_depth, fmt=args.format)
    (out / "synth_config.json").write_text(json.dumps(cfg.to_dict(), indent=2))
    print(f"wrote {u_seq.T} frame pairs to {out}/u and {out}/v")
    return EXIT_OK


def _merged_train_config(args) -> TrainConfig:
    data: dict = {}
    if args.config:
        data = json.loads(Path(args.config).read_text())
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object of flat keys")
    for name, _, _ in _TRAIN_FLAGS:
        value = getattr(args, name)
        if value is not None:
            data[name] = value
    if args.spatial_only:
        data["spatial_only"] = True
    return TrainConfig.from_dict(data)


def cmd_train(args) -> int:
    # imported lazily so --help stays fast
    from .trainer import ModelBundle, train

    cfg = _merged_train_config(args)
    u_seq = load_sequence(args.u_dir, Domain.U)
    v_seq = load_sequence(args.v_dir, Domain.V)
    if cfg.shift:
        u_seq, v_seq = align_time_shift(u_seq, v_seq, cfg.shift)
    train_set, val_set = extract_patches(
        u_seq, v_seq, crop=cfg.crop_size, n_train=args.n_train,
        n_val=args.n_val, tau=cfg.tau, seed=cfg.seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "train_config.json").write_text(json.dumps(cfg.to_dict(), indent=2))
    write_manifest(out / "dataset_manifest.json",
                   dataset_manifest(train_set, val_set,
                                    {"config_digest": cfg.digest()}))
    bundle = ModelBundle.create(cfg)
    records = train(bundle, train_set, out, resume_from=args.resume)
    last = records[-1] if records else None
    if last is not None:
        print(f"finished at step {last.step + 1}, generator objective "
              f"{last.total:.4f}")
    print(f"checkpoint: {out / 'checkpoint_final.pt'}")
    return EXIT_OK


def cmd_translate(args) -> int:
    from .inference import translate, translate_sequence_tiled
    from .trainer import restore_bundle

    bundle, _, _, _ = restore_bundle(args.checkpoint)
    direction = Direction(args.direction)
    seq = load_sequence(args.in_dir, direction.source)
    if args.tiled:
        if args.mode == "averaged":
            raise ValueError("tiled translation supports spatial mode only")
        out_seq = translate_sequence_tiled(bundle, seq, direction,
                                           tile=args.tile, overlap=args.overlap)
    else:
        out_seq = translate(bundle, seq, direction, args.mode)
    paths = write_sequence(out_seq, args.out_dir, bit_depth=args.bit_depth,
                           fmt=args.format, suffix=args.suffix)
    print(f"wrote {len(paths)} frames to {args.out_dir}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    direction = Direction(args.direction)
    pred = load_sequence(args.pred_dir, direction.target)
    real = load_sequence(args.real_dir, direction.target)
    report = evaluate_sequences(pred, real, direction=args.direction,
                                mode=args.mode)
    Path(args.out).write_text(report.to_json())
    if args.csv:
        report.write_csv(args.csv)
    agg = report.aggregate
    for name in ("mse", "ssim", "psnr"):
        print(f"{name}: mean={agg[name]['mean']} std={agg[name]['std']}")
    print(f"report: {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chan2chan",
        description="Cross-channel video translation for paired microscopy movies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a paired synthetic movie")
    p.add_argument("--out", required=True, help="output directory (u/ and v/ inside)")
    p.add_argument("--frames", type=int, default=20, help="movie length (default: 20)")
    p.add_argument("--frame-size", type=int, default=64, help="square frame side (default: 64)")
    p.add_argument("--n-blobs", type=int, default=6, help="moving spots per movie (default: 6)")
    p.add_argument("--blob-sigma", type=float, default=4.0, help="spot radius in px (default: 4)")
    p.add_argument("--velocity-range", type=float, default=2.0,
                   help="max spot speed in px/frame (default: 2)")
    p.add_argument("--lag", type=int, default=0,
                   help="frames by which the target trails the source (default: 0)")
    p.add_argument("--transform", choices=TRANSFORMS, default="identity",
                   help="pixel mapping from source to target (default: identity)")
    p.add_argument("--strength", type=float, default=1.0,
                   help="share of the target driven by the source (default: 1)")
    p.add_argument("--noise-sigma", type=float, default=0.0,
                   help="additive Gaussian noise level (default: 0)")
    p.add_argument("--threshold-level", type=float, default=THRESHOLD_LEVEL,
                   help="cut point for the threshold transform (default: 0.25)")
    p.add_argument("--seed", type=int, default=0, help="movie seed (default: 0)")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=16)
    p.add_argument("--format", choices=("png", "tif"), default="png")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the six networks on a frame pair")
    p.add_argument("--u-dir", required=True, help="source channel frame directory")
    p.add_argument("--v-dir", required=True, help="target channel frame directory")
    p.add_argument("--out", required=True, help="run directory for logs and checkpoints")
    p.add_argument("--config", help="JSON file of flat config keys")
    for name, typ, help_text in _TRAIN_FLAGS:
        p.add_argument(f"--{name.replace('_', '-')}", type=typ, default=None,
                       dest=name, help=help_text)
    p.add_argument("--spatial-only", action="store_true", default=False,
                   help="train and use only the cross-channel generators")
    p.add_argument("--n-train", type=int, default=256,
                   help="training windows to sample (default: 256)")
    p.add_argument("--n-val", type=int, default=0,
                   help="validation windows from a disjoint row band (default: 0)")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("translate", help="apply a trained model to a frame directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--in-dir", required=True, help="source channel frames")
    p.add_argument("--out-dir", required=True, help="where translated frames go")
    p.add_argument("--direction", choices=("u2v", "v2u"), default="u2v")
    p.add_argument("--mode", choices=("spatial", "averaged"), default=None,
                   help="override the trained output mode")
    p.add_argument("--suffix", default="",
                   help="filename suffix, e.g. _pred when predicting an unseen channel")
    p.add_argument("--tiled", action="store_true",
                   help="translate large frames in overlapping feathered tiles")
    p.add_argument("--tile", type=int, default=128, help="tile side (default: 128)")
    p.add_argument("--overlap", type=int, default=32, help="tile overlap (default: 32)")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=16)
    p.add_argument("--format", choices=("png", "tif"), default="png")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("evaluate", help="score predicted frames against real ones")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--real-dir", required=True)
    p.add_argument("--out", required=True, help="JSON report path")
    p.add_argument("--csv", help="optional per-frame CSV path")
    p.add_argument("--direction", choices=("u2v", "v2u"), default="u2v")
    p.add_argument("--mode", default="", help="label recorded in the report")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CHECKPOINT_ERRORS as e:
        _fail(str(e))
        return EXIT_CHECKPOINT
    except NaNLoss as e:
        _fail(f"training diverged: {e}")
        return EXIT_NAN
    except IO_ERRORS as e:
        _fail(str(e))
        return EXIT_IO
    except CONFIG_ERRORS as e:
        _fail(str(e))
        return EXIT_CONFIG
    except Chan2ChanError as e:
        _fail(str(e))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
