"""Command-line entry point: ``vilu <subcommand> [options]``.

Exit codes: 0 success, 1 any other failure, 2 usage or configuration error, 3 data
error, 4 numeric failure (including a failed gradient check).
"""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any, cast

from . import __version__
from .checks import TINY_NETWORK, run_gradcheck_suite
from .core.errors import DataError, NumericError, ValidationError, ViluError
from .core.validate import ensure_positive
from .data.manifest import LABEL_DIR, load_samples
from .data.nrrd import read_label_nrrd, read_nrrd, write_nrrd
from .data.preprocess import CLIP_HIGH, CLIP_LOW, DEFAULT_SPACING, preprocess_directory
from .data.synth import SynthConfig, synth_dataset, write_dataset
from .data.types import LabelMap, Volume
from .model.checkpoint import load_model
from .model.config import NetworkConfig
from .model.vilu import ViLUNet
from .train.config import TrainConfig
from .train.evaluate import evaluate, evaluate_directories, predict_sample
from .train.loop import train
from .utils.config import load_run_config, reject_unknown_keys
from .utils.logging import attach_stream_handler, get_logger

log = get_logger("cli")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

METRICS_KEYS = ("nsd_tolerance_mm",)
RUN_CONFIG_NAME = "run_config.json"


def _add_config_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON run config with network/train/metrics")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override a config value; repeatable, last one wins",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vilu",
        description="ViLU-Net segmentation: data preparation, training and evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic NRRD dataset")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--cases", type=int, default=8)
    synth.add_argument("--shape", type=int, nargs="+", default=[64, 64])
    synth.add_argument("--classes", type=int, default=2)
    synth.add_argument("--val-fraction", type=float, default=0.2)
    synth.add_argument("--encoding", choices=("raw", "gzip"), default="raw")
    synth.add_argument("--out", type=Path, required=True)

    prep = sub.add_parser("preprocess", help="clip, normalize and respace a dataset")
    prep.add_argument("--in", dest="in_dir", type=Path, required=True)
    prep.add_argument("--out", type=Path, required=True)
    prep.add_argument("--spacing", type=float, nargs="+", default=[DEFAULT_SPACING])
    prep.add_argument("--clip", type=float, nargs=2, default=[CLIP_LOW, CLIP_HIGH])

    fit = sub.add_parser("train", help="train a network on a manifest's train split")
    fit.add_argument("--data", type=Path, required=True, help="dataset directory")
    fit.add_argument("--out", type=Path, help="checkpoint directory (train.checkpoint_dir)")
    fit.add_argument("--epochs", type=int)
    fit.add_argument("--seed", type=int)
    fit.add_argument("--precision", choices=("float32", "float64"))
    fit.add_argument("--clip-norm", type=float)
    fit.add_argument("--resume", type=Path, help="checkpoint to continue from")
    _add_config_options(fit)

    ev = sub.add_parser("eval", help="score a checkpoint or a prediction directory")
    ev.add_argument("--checkpoint", type=Path)
    ev.add_argument("--data", type=Path, help="dataset directory scored with --checkpoint")
    ev.add_argument("--split", choices=("train", "val", "test", "all"), default="all")
    ev.add_argument("--pred", type=Path, help="directory of predicted label NRRDs")
    ev.add_argument("--ref", type=Path, help="directory of reference label NRRDs")
    ev.add_argument("--tolerance", type=float, help="NSD tolerance in mm")
    ev.add_argument("--save-pred", action="store_true", help="also write predicted labels")
    ev.add_argument("--out", type=Path, required=True)
    _add_config_options(ev)

    gc = sub.add_parser("gradcheck", help="run the 64-bit finite-difference suite")
    gc.add_argument("--samples", type=int, default=50)
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--tolerance", type=float, default=1e-4)
    gc.add_argument("--out", type=Path, help="optional JSON report")
    _add_config_options(gc)

    ov = sub.add_parser("overlay", help="write PNG slices with the label map blended in")
    ov.add_argument("--image", type=Path, required=True)
    ov.add_argument("--label", type=Path, required=True)
    ov.add_argument("--out", type=Path, required=True)
    ov.add_argument("--slice", dest="slices", type=int, action="append")
    ov.add_argument("--axis", type=int, default=0)
    ov.add_argument("--alpha", type=float, default=0.45)
    ov.add_argument("--case-id")
    return parser


def _run_config(args: argparse.Namespace, extra: Sequence[str] = ()) -> dict[str, dict[str, Any]]:
    """Defaults < config file < ``--set`` overrides < dedicated flags."""
    merged = load_run_config(args.config, [*args.overrides, *extra])
    reject_unknown_keys(merged["metrics"], METRICS_KEYS, "metrics config")
    return merged


def _flag_overrides(args: argparse.Namespace) -> list[str]:
    pairs = {
        "train.checkpoint_dir": str(args.out) if args.out else None,
        "train.epochs": args.epochs,
        "train.seed": args.seed,
        "train.precision": args.precision,
        "train.clip_norm": args.clip_norm,
    }
    return [f"{key}={json.dumps(value)}" for key, value in pairs.items() if value is not None]


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = SynthConfig(
        shape=tuple(args.shape), num_classes=args.classes, val_fraction=args.val_fraction
    )
    samples = synth_dataset(args.seed, args.cases, config=cfg)
    manifest = write_dataset(samples, args.out, encoding=args.encoding)
    print(manifest)
    return EXIT_OK


def cmd_preprocess(args: argparse.Namespace) -> int:
    spacing = args.spacing[0] if len(args.spacing) == 1 else tuple(args.spacing)
    result = preprocess_directory(args.in_dir, args.out, spacing, clip=tuple(args.clip))
    print(result.manifest_path)
    return EXIT_OK


def _network_config(values: dict[str, Any], samples: Sequence[Any]) -> NetworkConfig:
    values = dict(values)
    values.setdefault("num_classes", max(s.label.num_classes for s in samples))
    values.setdefault("spatial_rank", samples[0].image.ndim)
    return NetworkConfig.from_dict(values)


def cmd_train(args: argparse.Namespace) -> int:
    run = _run_config(args, _flag_overrides(args))
    train_cfg = TrainConfig.from_dict(run["train"])
    samples = load_samples(args.data)
    train_set = [s for s in samples if s.split == "train"]
    val_set = [s for s in samples if s.split == "val"]
    if not train_set:
        log.warning(
            "%s has no train-split cases; training on all %d cases", args.data, len(samples)
        )
        train_set = list(samples)
    net_cfg = _network_config(run["network"], samples)
    model = ViLUNet(net_cfg, seed=train_cfg.seed)
    out_dir = Path(train_cfg.checkpoint_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved = {
        "network": net_cfg.to_dict(),
        "train": train_cfg.to_dict(),
        "metrics": run["metrics"],
    }
    (out_dir / RUN_CONFIG_NAME).write_text(
        json.dumps(resolved, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    state = train(model, train_set, train_cfg, val_samples=val_set, resume=args.resume)
    summary = {"step": state.step, "epoch": state.epoch, "best_val_dsc": state.best_val_dsc}
    print(json.dumps(summary))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    run = _run_config(args)
    tolerance = (
        args.tolerance
        if args.tolerance is not None
        else run["metrics"].get("nsd_tolerance_mm", 1.0)
    )
    ensure_positive(tolerance, "NSD tolerance")
    if args.pred is not None or args.ref is not None:
        if args.pred is None or args.ref is None:
            raise ValidationError("--pred and --ref must be given together.")
        summary = evaluate_directories(args.pred, args.ref, tolerance_mm=tolerance)
    else:
        if args.checkpoint is None or args.data is None:
            raise ValidationError("eval needs --checkpoint with --data, or --pred with --ref.")
        model, _ = load_model(args.checkpoint)
        splits = None if args.split == "all" else [args.split]
        samples = load_samples(args.data, splits=splits)
        if not samples:
            raise DataError(f"{args.data} has no cases in split {args.split!r}.")
        summary = evaluate(model, samples, model.config.num_classes, tolerance_mm=tolerance)
        if args.save_pred:
            for sample in samples:
                labels = LabelMap(
                    data=predict_sample(model, sample),
                    num_classes=model.config.num_classes,
                    spacing=sample.image.spacing,
                    origin=sample.image.origin,
                    orientation=sample.image.orientation,
                )
                write_nrrd(args.out / LABEL_DIR / f"{sample.case_id}.nrrd", labels)
    summary.write(args.out)
    print(json.dumps(summary.mean, sort_keys=True))
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    run = _run_config(args)
    config = NetworkConfig.from_dict({**TINY_NETWORK.to_dict(), **run["network"]})
    reports = run_gradcheck_suite(
        samples=args.samples, seed=args.seed, tolerance=args.tolerance, config=config
    )
    payload = [report.to_dict() for report in reports]
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(payload, indent=2))
    failed = [report.name for report in reports if not report.passed]
    if failed:
        raise NumericError(f"gradient check failed for {failed}.")
    return EXIT_OK


def cmd_overlay(args: argparse.Namespace) -> int:
    from .viz.overlay import write_overlays

    image = cast(Volume, read_nrrd(args.image))
    labels = read_label_nrrd(args.label)
    written = write_overlays(
        image,
        labels,
        args.out,
        slices=args.slices,
        axis=args.axis,
        alpha=args.alpha,
        case_id=args.case_id or args.image.stem,
    )
    for path in written:
        print(path)
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "overlay": cmd_overlay,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    attach_stream_handler(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except NumericError as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except ViluError as exc:
        log.error("%s", exc)
        return EXIT_FAILURE
    except (ValueError, ArithmeticError) as exc:
        log.error("%s failed: %s", args.command, exc, exc_info=args.verbose)
        return EXIT_FAILURE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
