"""Dataset ingestion, the reconstruct-filter-score pipeline, ROC/AUC,
and the Gabor parameter sweep.

Datasets follow the usual anomaly-detection layout: train/good holds
normal images only; test/good holds normal test images and every other
test/<name> directory holds defects. Scores are ranked with higher =
more defective; AUC uses the Mann-Whitney convention (ties get half
credit), which the trapezoidal area under the threshold-swept ROC curve
reproduces exactly.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import net
from .errors import ConfigError, DatasetError
from .fsio import atomic_write_text
from .gabor import GaborBank, GaborParams, apply_bank, build_bank, dfscore
from .imgcore import Image, ensure_rgb, load_image, to_grayscale
from .train import list_images


def thread_count(requested: int | None = None) -> int:
    """Worker count: explicit argument, else GABORDEFECT_THREADS, else CPUs."""
    if requested is not None:
        return max(1, requested)
    env = os.environ.get("GABORDEFECT_THREADS")
    if env is not None:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"GABORDEFECT_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError(f"GABORDEFECT_THREADS must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


@dataclass
class DatasetSplit:
    train_normal: list[Path]
    test_items: list[tuple[Path, str]]  # (path, "normal" | "defect")


def load_dataset(root) -> DatasetSplit:
    """Walk an anomaly-detection tree: train/good plus test/<subdirs>."""
    root = Path(root)
    train_dir = root / "train" / "good"
    if not train_dir.is_dir():
        raise DatasetError(f"missing directory: {train_dir}")
    train = list_images(train_dir)
    if not train:
        raise DatasetError(f"no training images in {train_dir}")
    test_dir = root / "test"
    good_dir = test_dir / "good"
    if not good_dir.is_dir():
        raise DatasetError(f"missing directory: {good_dir}")
    items: list[tuple[Path, str]] = [(p, "normal") for p in list_images(good_dir)]
    if not items:
        raise DatasetError(f"no normal test images in {good_dir} (AUC undefined)")
    defect_dirs = sorted(d for d in test_dir.iterdir() if d.is_dir() and d.name != "good")
    n_defect = 0
    for d in defect_dirs:
        files = list_images(d)
        items += [(p, "defect") for p in files]
        n_defect += len(files)
    if n_defect == 0:
        raise DatasetError(f"no defect test images under {test_dir} (AUC undefined)")
    items.sort(key=lambda it: str(it[0]))
    return DatasetSplit(train, items)


@dataclass(frozen=True)
class ScoreRecord:
    path: str
    label: str
    score: float


@dataclass
class RocResult:
    auc: float
    curve: list[tuple[float, float]]  # (fpr, tpr) from (0,0) to (1,1)


def reconstruct_gray(params, cfg: net.ModelConfig, img: Image) -> Image:
    """Forward one image, clamp the output to [0, 1], convert to luminance."""
    batch = ensure_rgb(img).data[None]
    out, _ = net.forward(params, cfg, batch)
    return to_grayscale(Image(np.clip(out[0], 0.0, 1.0)))


def score_image(
    params, cfg: net.ModelConfig, bank: GaborBank, img: Image,
    path: str = "", label: str = "",
) -> ScoreRecord:
    """Reconstruct, filter with the bank, and take the defect score."""
    gray = reconstruct_gray(params, cfg, img)
    return ScoreRecord(path, label, dfscore(apply_bank(gray, bank)))


def roc_auc(records: list[ScoreRecord]) -> RocResult:
    """ROC curve by threshold sweep over distinct scores, AUC by trapezoids.

    Equals P(defect score > normal score) + half the tie probability.
    """
    scores = np.array([r.score for r in records], dtype=np.float64)
    labels = np.array([r.label == "defect" for r in records])
    n_pos = int(labels.sum())
    n_neg = len(records) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DatasetError("AUC needs at least one normal and one defect record")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    l = labels[order]
    curve = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < len(s):
        t = s[i]
        while i < len(s) and s[i] == t:
            if l[i]:
                tp += 1
            else:
                fp += 1
            i += 1
        curve.append((fp / n_neg, tp / n_pos))
    auc = 0.0
    for (x0, y0), (x1, y1) in zip(curve, curve[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0
    return RocResult(float(auc), curve)


def evaluate(
    params, cfg: net.ModelConfig, bank: GaborBank, split: DatasetSplit,
    out_dir=None, workers: int | None = None,
) -> tuple[RocResult, list[ScoreRecord]]:
    """Score every test item; optionally write scores.csv and roc.csv."""
    size = cfg.image_size

    def one(item: tuple[Path, str]) -> ScoreRecord:
        path, label = item
        img = load_image(path, resize_to=(size, size))
        return score_image(params, cfg, bank, img, path=str(path), label=label)

    n_workers = thread_count(workers)
    if n_workers > 1 and len(split.test_items) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as ex:
            records = list(ex.map(one, split.test_items))
    else:
        records = [one(it) for it in split.test_items]
    roc = roc_auc(records)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        lines = ["path,label,score"]
        lines += [f"{r.path},{r.label},{r.score!r}" for r in records]
        atomic_write_text(Path(out_dir) / "scores.csv", "\n".join(lines) + "\n")
        lines = ["fpr,tpr"]
        lines += [f"{x!r},{y!r}" for x, y in roc.curve]
        atomic_write_text(Path(out_dir) / "roc.csv", "\n".join(lines) + "\n")
    return roc, records


@dataclass
class SweepRanges:
    kernel_sizes: list[int]
    sigmas: list[float]
    lambdas: list[float]
    gammas: list[float]

    def __post_init__(self) -> None:
        for name in ("kernel_sizes", "sigmas", "lambdas", "gammas"):
            if not getattr(self, name):
                raise ConfigError(f"sweep range {name} is empty")

    def tuples(self) -> list[GaborParams]:
        """All combinations, lexicographic in (kernel, sigma, lambda, gamma)."""
        return [
            GaborParams(k, s, lam, g)
            for k in self.kernel_sizes
            for s in self.sigmas
            for lam in self.lambdas
            for g in self.gammas
        ]


def default_ranges() -> SweepRanges:
    """The standard search grid: 18 x 20 x 20 x 20 parameter tuples."""
    return SweepRanges(
        kernel_sizes=list(range(5, 40, 2)),
        sigmas=[float(v) for v in range(1, 21)],
        lambdas=[float(v) for v in range(1, 21)],
        gammas=[i / 5.0 for i in range(1, 21)],
    )


def sweep(
    params, cfg: net.ModelConfig, split: DatasetSplit, ranges: SweepRanges,
    workers: int | None = None,
) -> list[tuple[GaborParams, float]]:
    """Try every parameter tuple against cached reconstructions.

    The model forward does not depend on the Gabor parameters, so each
    test image is reconstructed exactly once; the sweep then costs one
    bank application per (tuple, image). Results are sorted by AUC
    descending, ties broken lexicographically on the parameters.
    """
    size = cfg.image_size
    cached: list[tuple[Image, str]] = []
    for path, label in split.test_items:
        img = load_image(path, resize_to=(size, size))
        cached.append((reconstruct_gray(params, cfg, img), label))

    def auc_for(p: GaborParams) -> float:
        bank = build_bank(p)
        records = [
            ScoreRecord("", label, dfscore(apply_bank(gray, bank)))
            for gray, label in cached
        ]
        return roc_auc(records).auc

    tuples = ranges.tuples()
    n_workers = thread_count(workers)
    if n_workers > 1 and len(tuples) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as ex:
            aucs = list(ex.map(auc_for, tuples))
    else:
        aucs = [auc_for(p) for p in tuples]
    ranked = sorted(
        zip(tuples, aucs),
        key=lambda pa: (-pa[1], pa[0].kernel_size, pa[0].sigma, pa[0].lambd, pa[0].gamma),
    )
    return ranked
