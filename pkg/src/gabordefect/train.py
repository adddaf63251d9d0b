"""Losses, the Adam training loop over masked pairs, and loss logging.

The loop draws normal images, corrupts them with salt-and-pepper grid
masking, and steps Adam on the sum of a pixel L1 loss and a Gaussian
blurred L1 loss. Everything is deterministic in (seed, data, config):
per-epoch shuffles and per-pair masks use seeds derived from
(seed, epoch, position).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import net, ops
from .augment import GridSpec, NoiseSpec, make_training_pair
from .errors import DatasetError, ShapeError, TrainingError
from .fsio import atomic_write_text
from .imgcore import Image, ensure_rgb, gaussian_kernel, load_image


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 8
    learning_rate: float = 1e-4
    grid: GridSpec = GridSpec(8)
    noise: NoiseSpec = NoiseSpec(0.05, 0.05, 0.5)
    seed: int = 0
    # target handling: False trains against the clean image, True
    # against the identically masked one
    masked_target: bool = False

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")


@dataclass(frozen=True)
class LossReport:
    l1: float
    gaussian: float
    total: float


_blur_kernel_data: np.ndarray | None = None


def _blur_kernel() -> np.ndarray:
    global _blur_kernel_data
    if _blur_kernel_data is None:
        _blur_kernel_data = gaussian_kernel(11, 5.0).data
    return _blur_kernel_data


def l1_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean absolute difference over all elements."""
    if pred.shape != target.shape:
        raise ShapeError(f"loss shape mismatch: {pred.shape} vs {target.shape}")
    return float(np.mean(np.abs(pred - target)))


def gaussian_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean absolute difference after blurring both sides per channel."""
    if pred.shape != target.shape:
        raise ShapeError(f"loss shape mismatch: {pred.shape} vs {target.shape}")
    k = _blur_kernel()
    return float(
        np.mean(np.abs(ops.blur_same_reflect(pred, k) - ops.blur_same_reflect(target, k)))
    )


def total_loss(pred: np.ndarray, target: np.ndarray) -> LossReport:
    """Unweighted sum of the two losses."""
    a = l1_loss(pred, target)
    b = gaussian_loss(pred, target)
    return LossReport(a, b, a + b)


def loss_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    """d(total loss) / d(pred)."""
    n = pred.size
    g = np.sign(pred - target) / n
    k = _blur_kernel()
    diff = ops.blur_same_reflect(pred, k) - ops.blur_same_reflect(target, k)
    return g + ops.blur_same_reflect_bwd(np.sign(diff) / n, k)


class Adam:
    """Adam with bias correction; updates parameter arrays in place."""

    def __init__(self, params: dict[str, np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name, p in params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def list_images(directory) -> list[Path]:
    """Raster files in a directory, lexicographic by name."""
    d = Path(directory)
    if not d.is_dir():
        raise DatasetError(f"not a directory: {d}")
    return sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def _check_finite(params: dict[str, np.ndarray], where: str) -> None:
    for name, arr in params.items():
        if not np.isfinite(arr).all():
            raise TrainingError(f"non-finite values in parameter {name} after {where}")


def fit(
    params: dict[str, np.ndarray],
    cfg: net.ModelConfig,
    tcfg: TrainConfig,
    train_dir,
    out_dir,
    on_epoch=None,
) -> tuple[dict[str, np.ndarray], list[LossReport]]:
    """Train on every image under train_dir; checkpoints and a loss CSV
    land in out_dir (epoch_###.ckpt, loss.csv).

    on_epoch, if given, is called with (epoch_index, LossReport) as each
    epoch finishes. Returns the trained parameters and the loss history.
    """
    paths = list_images(train_dir)
    if not paths:
        raise DatasetError(f"no training images in {train_dir}")
    os.makedirs(out_dir, exist_ok=True)
    size = cfg.image_size
    images = [
        ensure_rgb(load_image(p, resize_to=(size, size))).data for p in paths
    ]

    opt = Adam(params, lr=tcfg.learning_rate)
    history: list[LossReport] = []
    for epoch in range(tcfg.epochs):
        order = np.random.default_rng([tcfg.seed, epoch]).permutation(len(images))
        l1_sum = 0.0
        gauss_sum = 0.0
        seen = 0
        for start in range(0, len(order), tcfg.batch_size):
            idxs = order[start : start + tcfg.batch_size]
            ins, tgts = [], []
            for pos, idx in enumerate(idxs, start=start):
                pair = make_training_pair(
                    Image(images[idx]), tcfg.grid, tcfg.noise,
                    [tcfg.seed, epoch, pos], tcfg.masked_target,
                )
                ins.append(pair.input.data)
                tgts.append(pair.target.data)
            batch = np.stack(ins)
            target = np.stack(tgts)
            out, trace = net.forward(params, cfg, batch)
            report = total_loss(out, target)
            if not math.isfinite(report.total):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch + 1}, batch {start // tcfg.batch_size}"
                )
            grads = net.backward(params, cfg, trace, loss_grad(out, target))
            opt.step(params, grads)
            _check_finite(params, f"epoch {epoch + 1}, batch {start // tcfg.batch_size}")
            l1_sum += report.l1 * len(idxs)
            gauss_sum += report.gaussian * len(idxs)
            seen += len(idxs)
        mean_l1 = l1_sum / seen
        mean_gauss = gauss_sum / seen
        ep = LossReport(mean_l1, mean_gauss, mean_l1 + mean_gauss)
        history.append(ep)
        net.save_checkpoint(Path(out_dir) / f"epoch_{epoch + 1:03d}.ckpt", params, cfg)
        if on_epoch is not None:
            on_epoch(epoch, ep)

    lines = ["epoch,l1,gaussian,total"]
    lines += [f"{i + 1},{r.l1!r},{r.gaussian!r},{r.total!r}" for i, r in enumerate(history)]
    atomic_write_text(Path(out_dir) / "loss.csv", "\n".join(lines) + "\n")
    return params, history
