"""Command-line entry points: train, eval, infer, synth, viz.

Every run writes a manifest.json (command, resolved config, seed,
timestamp, output paths) into the output directory before any work
starts, so runs are self-describing. Exit codes: 0 success, 1 runtime
error, 2 usage error.
"""

import argparse
import datetime
import json
import os
import sys
from dataclasses import asdict

import numpy as np
import torch
import yaml

import revisp
from revisp.data import (
    DatasetIndex,
    load_raw,
    load_srgb,
    save_raw,
    save_raw_visualization,
    save_srgb,
    to_image,
    to_tensor,
    write_split_metadata,
)
from revisp.ispsim import make_synthetic_pair
from revisp.network import ModelConfig
from revisp.train import TrainConfig, Trainer, evaluate, train

DATA_ROOT_ENV = "REVISP_DATA_ROOT"


def _load_config_file(path):
    if path is None:
        return {}
    with open(path) as f:
        loaded = yaml.safe_load(f) or {}
    if not isinstance(loaded, dict):
        raise ValueError(f"{path}: config must be a mapping")
    return loaded


def _resolve_configs(args):
    """Merge config file sections with CLI flag overrides."""
    raw = _load_config_file(getattr(args, "config", None))
    train_section = dict(raw.get("train", {}))
    model_section = dict(raw.get("model", {}))
    if getattr(args, "seed", None) is not None:
        train_section["seed"] = args.seed
        model_section.setdefault("seed", args.seed)
    if getattr(args, "out", None):
        train_section["out_dir"] = args.out
    if getattr(args, "epochs", None) is not None:
        train_section["epochs"] = args.epochs
    train_config = TrainConfig.from_dict(train_section)
    model_config = ModelConfig(**model_section) if model_section else None
    return train_config, model_config


def _data_root(args):
    root = getattr(args, "data_dir", None) or os.environ.get(DATA_ROOT_ENV)
    if not root:
        raise ValueError(f"no data directory: pass --data-dir or set {DATA_ROOT_ENV}")
    return root


def write_manifest(out_dir, command, config_snapshot, seed, outputs):
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "command": command,
        "config": config_snapshot,
        "version": revisp.__version__,
        "seed": seed,
        "started_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "argv": sys.argv[1:],
        "outputs": outputs,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return path


def cmd_train(args):
    train_config, model_config = _resolve_configs(args)
    snapshot = {"train": train_config.to_dict()}
    if model_config is not None:
        snapshot["model"] = asdict(model_config)
    write_manifest(
        train_config.out_dir, "train", snapshot, train_config.seed,
        {"checkpoints": train_config.out_dir, "metrics": os.path.join(train_config.out_dir, "metrics.csv")},
    )
    index = DatasetIndex.build(_data_root(args), args.track)
    final = train(train_config, index, model_config=model_config, resume=args.checkpoint)
    print(f"final checkpoint: {final}")
    return 0


def cmd_eval(args):
    trainer = Trainer.from_checkpoint(args.checkpoint)
    index = DatasetIndex.build(_data_root(args), args.track, split=args.split)
    out_dir = args.out or "."
    write_manifest(
        out_dir, "eval", {"checkpoint": args.checkpoint, "split": args.split},
        trainer.config.seed, {"report": os.path.join(out_dir, "eval.json")},
    )
    mean_psnr, mean_ssim = evaluate(trainer.generator, index)
    print(f"psnr={mean_psnr:.4f} ssim={mean_ssim:.6f}")
    with open(os.path.join(out_dir, "eval.json"), "w") as f:
        json.dump({"psnr": mean_psnr, "ssim": mean_ssim, "pairs": len(index)}, f, indent=2)
    return 0


def cmd_infer(args):
    trainer = Trainer.from_checkpoint(args.checkpoint)
    out_dir = args.out or "."
    stem = os.path.splitext(os.path.basename(args.input))[0]
    raw_path = os.path.join(out_dir, f"{stem}_raw.png")
    preview_path = os.path.join(out_dir, f"{stem}_preview.png")
    write_manifest(
        out_dir, "infer", {"checkpoint": args.checkpoint, "input": args.input},
        trainer.config.seed, {"raw": raw_path, "preview": preview_path},
    )
    srgb = to_tensor(load_srgb(args.input)).unsqueeze(0)
    with torch.no_grad():
        pred = trainer.generator(srgb)
    raw = to_image(pred)
    save_raw(raw_path, raw)
    save_raw_visualization(raw, preview_path)
    print(f"wrote {raw_path} and {preview_path}")
    return 0


def cmd_synth(args):
    out_dir = args.out
    split_dir = os.path.join(out_dir, "synth", "train")
    srgb_dir = os.path.join(split_dir, "srgb")
    raw_dir = os.path.join(split_dir, "raw")
    write_manifest(out_dir, "synth", {"count": args.count, "size": args.size},
                   args.seed, {"dataset": split_dir})
    os.makedirs(srgb_dir, exist_ok=True)
    os.makedirs(raw_dir, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    all_params = {}
    for i in range(args.count):
        raw, srgb, params = make_synthetic_pair((args.size, args.size), rng)
        name = f"{i:04d}"
        save_srgb(os.path.join(srgb_dir, name + ".png"), srgb)
        save_raw(os.path.join(raw_dir, name + ".png"), raw)
        all_params[name] = params.to_dict()
    with open(os.path.join(split_dir, "params.yaml"), "w") as f:
        yaml.safe_dump(all_params, f, sort_keys=True)
    write_split_metadata(split_dir, "synth")
    print(f"wrote {args.count} pairs under {split_dir}")
    return 0


def cmd_viz(args):
    out_dir = args.out or "."
    stem = os.path.splitext(os.path.basename(args.input))[0]
    preview_path = os.path.join(out_dir, f"{stem}_preview.png")
    write_manifest(out_dir, "viz", {"input": args.input}, None, {"preview": preview_path})
    raw = load_raw(args.input)
    save_raw_visualization(raw, preview_path)
    print(f"wrote {preview_path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="revisp", description="Reversed-ISP toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=False, checkpoint=False):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--deterministic", action="store_true")
        if data:
            p.add_argument("--data-dir", default=None)
            p.add_argument("--track", choices=("s7", "p20", "synth"), default="synth")
        if checkpoint:
            p.add_argument("--checkpoint", default=None)

    p = sub.add_parser("train", help="train a model")
    common(p, data=True, checkpoint=True)
    p.add_argument("--config", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    common(p, data=True, checkpoint=True)
    p.add_argument("--split", default="train")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="map one sRGB image to RAW")
    common(p, checkpoint=True)
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    common(p)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--size", type=int, default=64)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("viz", help="preview a stored RAW file")
    common(p)
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_viz)
    return parser


def dispatch(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("synth",) and args.seed is None:
        args.seed = 0
    if args.command in ("synth", "viz") and not args.out:
        parser.error(f"{args.command} requires --out")
    if getattr(args, "checkpoint", None) is None and args.command in ("eval", "infer"):
        parser.error(f"{args.command} requires --checkpoint")
    if args.deterministic:
        torch.use_deterministic_algorithms(True)
    try:
        return args.func(args)
    except Exception as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


def entry():
    sys.exit(dispatch())


if __name__ == "__main__":
    entry()
