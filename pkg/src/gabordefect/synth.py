"""Procedural striped-texture dataset with blob defects.

Generates the usual anomaly-detection tree (train/good, test/good,
test/blob) of sinusoidal stripe textures with mild seeded jitter.
Defect images take the same stripes and overwrite 1-3 soft-edged
elliptical blobs, each independently bright or dark. Everything is
deterministic in the seed: per-image generators are derived from
(seed, split, index).

The stripes run vertically (intensity varies along x), so an oriented
filter near 0 radians responds to them, and the stripe period sits
inside the standard wavelength search range.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .imgcore import Image, save_image

STRIPE_AMPLITUDE = 0.14
PIXEL_NOISE = 0.02


def stripe_image(size: int, period: float, rng: np.random.Generator) -> np.ndarray:
    """One normal texture: vertical stripes with seeded phase, slight
    per-image amplitude variation, a slow row-phase wobble, and pixel noise."""
    x = np.arange(size, dtype=np.float64)[None, :]
    y = np.arange(size, dtype=np.float64)[:, None]
    phase = rng.uniform(0.0, 2.0 * math.pi)
    amp = STRIPE_AMPLITUDE * rng.uniform(0.9, 1.1)
    wobble = 0.35 * np.sin(2.0 * math.pi * y / size + rng.uniform(0.0, 2.0 * math.pi))
    img = 0.5 + amp * np.sin(2.0 * math.pi * x / period + phase + wobble)
    img += rng.normal(0.0, PIXEL_NOISE, size=(size, size))
    return np.clip(img, 0.0, 1.0)


def add_blobs(
    img: np.ndarray, rng: np.random.Generator, n_min: int = 1, n_max: int = 3
) -> tuple[np.ndarray, np.ndarray]:
    """Overwrite 1-3 soft elliptical blobs; returns (image, altered mask).

    Each blob is independently bright (towards 1) or dark (towards 0),
    rotated, and blended with a soft edge so the defect has both an
    interior plateau and an oriented boundary.
    """
    size = img.shape[0]
    out = img.copy()
    mask = np.zeros_like(img, dtype=bool)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    n_blobs = int(rng.integers(n_min, n_max + 1))
    for _ in range(n_blobs):
        cy = rng.uniform(0.2 * size, 0.8 * size)
        cx = rng.uniform(0.2 * size, 0.8 * size)
        ry = rng.uniform(0.05 * size, 0.12 * size)
        rx = rng.uniform(0.05 * size, 0.12 * size)
        ang = rng.uniform(0.0, math.pi)
        bright = rng.random() < 0.5
        level = rng.uniform(0.88, 0.98) if bright else rng.uniform(0.02, 0.12)
        ca, sa = math.cos(ang), math.sin(ang)
        u = (xx - cx) * ca + (yy - cy) * sa
        v = -(xx - cx) * sa + (yy - cy) * ca
        d = np.sqrt((u / rx) ** 2 + (v / ry) ** 2)
        alpha = np.clip((1.0 - d) * 3.0, 0.0, 1.0)
        out = out * (1.0 - alpha) + level * alpha
        mask |= alpha > 0.0
    return np.clip(out, 0.0, 1.0), mask


def generate_dataset(
    out_dir,
    size: int = 64,
    period: float = 8.0,
    n_train: int = 64,
    n_test_normal: int = 32,
    n_test_defect: int = 32,
    seed: int = 0,
) -> int:
    """Write the full tree; returns the number of images written."""
    out = Path(out_dir)
    splits = [
        (out / "train" / "good", n_train, 0, False),
        (out / "test" / "good", n_test_normal, 1, False),
        (out / "test" / "blob", n_test_defect, 2, True),
    ]
    written = 0
    for directory, count, split_id, defective in splits:
        directory.mkdir(parents=True, exist_ok=True)
        for i in range(count):
            rng = np.random.default_rng([seed, split_id, i])
            img = stripe_image(size, period, rng)
            if defective:
                img, _ = add_blobs(img, rng)
            save_image(Image(img[None, :, :]), directory / f"{i:03d}.png")
            written += 1
    return written
