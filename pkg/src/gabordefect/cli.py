"""Command-line entry point.

Commands:
  train      train the reconstruction network on train/good
  eval       score a test split and report AUC
  sweep      grid-search Gabor parameters against a trained model
  visualize  dump reconstruction, response maps, and the filter bank
  synth      generate a synthetic striped dataset with blob defects

Every command exits 0 on success and nonzero with a one-line stderr
diagnostic on any expected failure. Outputs are written atomically, and
runs are deterministic in (config, inputs, seed).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import net, synth, train
from .config import RunConfig, parse_config
from .errors import ConfigError, GaborDefectError
from .evaluation import (
    SweepRanges,
    default_ranges,
    evaluate,
    load_dataset,
    reconstruct_gray,
    sweep,
)
from .fsio import atomic_write_text
from .gabor import apply_bank, average_response, build_bank
from .imgcore import Image, ensure_rgb, load_image, save_image


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gabordefect",
        description="Reconstruction-based surface defect detection with Gabor scoring.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the reconstruction network")
    p.add_argument("--config", required=True, help="run config file")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--seed", type=int, help="training seed (overrides config)")

    p = sub.add_parser("eval", help="score the test split and print AUC")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", help="directory for scores.csv / roc.csv")

    p = sub.add_parser("sweep", help="grid-search Gabor parameters")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", help="directory for sweep.csv")
    p.add_argument("--kernel", help="odd kernel sizes, start:stop[:step] or one value")
    p.add_argument("--sigma", help="sigma range, start:stop[:step] or one value")
    p.add_argument("--lambda", dest="lambd", help="wavelength range")
    p.add_argument("--gamma", help="aspect-ratio range")

    p = sub.add_parser("visualize", help="write reconstruction/response/bank PNGs")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True, help="input image")
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("synth", help="generate a synthetic striped dataset")
    p.add_argument("--out", required=True, help="dataset root to create")
    p.add_argument("--size", type=int, default=64, help="image side length")
    p.add_argument("--period", type=float, default=8.0, help="stripe period in pixels")
    p.add_argument("--train", type=int, default=64, dest="n_train", help="training images")
    p.add_argument("--test-normal", type=int, default=32, help="normal test images")
    p.add_argument("--test-defect", type=int, default=32, help="defect test images")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _load_model(args, rc: RunConfig):
    """Load the checkpoint and cross-check its config against the run config."""
    params, cfg = net.load_checkpoint(args.checkpoint)
    if cfg != rc.model:
        diffs = [
            f"{f.name}: checkpoint {getattr(cfg, f.name)} vs config {getattr(rc.model, f.name)}"
            for f in dataclasses.fields(cfg)
            if getattr(cfg, f.name) != getattr(rc.model, f.name)
        ]
        raise ConfigError("checkpoint/config mismatch: " + "; ".join(diffs))
    return params, cfg


def _parse_range(spec: str | None, fallback: list, integer: bool) -> list:
    """start:stop[:step], inclusive stop, or a single value; None keeps fallback."""
    if spec is None:
        return fallback
    parts = spec.split(":")
    conv = int if integer else float
    try:
        if len(parts) == 1:
            return [conv(parts[0])]
        if len(parts) not in (2, 3):
            raise ValueError
        start = conv(parts[0])
        stop = conv(parts[1])
        step = conv(parts[2]) if len(parts) == 3 else (1 if integer else 1.0)
    except ValueError:
        raise ConfigError(f"bad range {spec!r}: expected start:stop[:step]") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"bad range {spec!r}: need stop >= start and step > 0")
    n = int((stop - start) / step + 1e-9) + 1
    return [conv(start + i * step) for i in range(n)]


def _minmax_image(plane: np.ndarray) -> Image:
    """Min-max normalize to [0, 1] for display; constant maps become zeros."""
    lo = plane.min()
    hi = plane.max()
    if hi > lo:
        plane = (plane - lo) / (hi - lo)
    else:
        plane = np.zeros_like(plane)
    return Image(plane[None, :, :])


def _cmd_train(args) -> int:
    rc = parse_config(args.config)
    tcfg = rc.train
    if args.seed is not None:
        tcfg = dataclasses.replace(tcfg, seed=args.seed)
    out_dir = args.out or rc.output_dir
    train_dir = Path(rc.require_dataset_root()) / "train" / "good"
    params = net.init_params(rc.model, tcfg.seed)

    def report(epoch: int, r: train.LossReport) -> None:
        print(f"epoch {epoch + 1}: l1={r.l1:.6f} gaussian={r.gaussian:.6f} total={r.total:.6f}")

    train.fit(params, rc.model, tcfg, train_dir, out_dir, on_epoch=report)
    return 0


def _cmd_eval(args) -> int:
    rc = parse_config(args.config)
    params, cfg = _load_model(args, rc)
    bank = build_bank(rc.require_gabor())
    split = load_dataset(rc.require_dataset_root())
    out_dir = args.out or rc.output_dir
    roc, _ = evaluate(params, cfg, bank, split, out_dir=out_dir)
    print(f"AUC: {roc.auc!r}")
    return 0


def _cmd_sweep(args) -> int:
    rc = parse_config(args.config)
    params, cfg = _load_model(args, rc)
    split = load_dataset(rc.require_dataset_root())
    base = default_ranges()
    ranges = SweepRanges(
        kernel_sizes=_parse_range(args.kernel, base.kernel_sizes, integer=True),
        sigmas=_parse_range(args.sigma, base.sigmas, integer=False),
        lambdas=_parse_range(args.lambd, base.lambdas, integer=False),
        gammas=_parse_range(args.gamma, base.gammas, integer=False),
    )
    ranked = sweep(params, cfg, split, ranges)
    out_dir = Path(args.out or rc.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["kernel,sigma,lambda,gamma,auc"]
    lines += [
        f"{p.kernel_size},{p.sigma!r},{p.lambd!r},{p.gamma!r},{auc!r}"
        for p, auc in ranked
    ]
    atomic_write_text(out_dir / "sweep.csv", "\n".join(lines) + "\n")
    best, best_auc = ranked[0]
    print(
        f"best: kernel={best.kernel_size} sigma={best.sigma} "
        f"lambda={best.lambd} gamma={best.gamma} auc={best_auc!r}"
    )
    return 0


def _cmd_visualize(args) -> int:
    rc = parse_config(args.config)
    params, cfg = _load_model(args, rc)
    bank = build_bank(rc.require_gabor())
    out_dir = Path(args.out or rc.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    img = load_image(args.image, resize_to=(cfg.image_size, cfg.image_size))
    batch = ensure_rgb(img).data[None]
    recon, _ = net.forward(params, cfg, batch)
    recon_img = Image(np.clip(recon[0], 0.0, 1.0))
    save_image(recon_img, out_dir / "recon.png")

    gray = reconstruct_gray(params, cfg, img)
    stack = apply_bank(gray, bank)
    save_image(_minmax_image(average_response(stack).data[0]), out_dir / "avg.png")
    for k, resp in enumerate(stack.responses):
        save_image(_minmax_image(resp.data[0]), out_dir / f"resp_{k}.png")
    for k, kern in enumerate(bank.kernels):
        save_image(_minmax_image(kern.data), out_dir / f"bank_{k}.png")
    print(f"wrote 18 images to {out_dir}")
    return 0


def _cmd_synth(args) -> int:
    n = synth.generate_dataset(
        args.out,
        size=args.size,
        period=args.period,
        n_train=args.n_train,
        n_test_normal=args.test_normal,
        n_test_defect=args.test_defect,
        seed=args.seed,
    )
    print(f"wrote {n} images under {args.out}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "visualize": _cmd_visualize,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (GaborDefectError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
