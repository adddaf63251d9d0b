"""Grid partitioning and salt-and-pepper masking for training pairs.

Training corrupts normal images: the image is split into a k x k grid,
each patch is independently selected with probability p_patch, and
inside a selected patch each pixel independently becomes salt (1.0 on
all channels) with probability p_salt or pepper (0.0) with probability
p_pepper. The network is trained to undo the corruption.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .imgcore import Image


@dataclass(frozen=True)
class GridSpec:
    """k patches per side; k must divide the working image sides."""

    k: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"grid k must be positive, got {self.k}")


@dataclass(frozen=True)
class NoiseSpec:
    p_salt: float
    p_pepper: float
    p_patch: float = 0.5

    def __post_init__(self) -> None:
        for name, v in (("p_salt", self.p_salt), ("p_pepper", self.p_pepper),
                        ("p_patch", self.p_patch)):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.p_salt + self.p_pepper > 1.0:
            raise ValueError(
                f"p_salt + p_pepper must not exceed 1, got {self.p_salt + self.p_pepper}"
            )


@dataclass
class TrainingPair:
    """Masked input, its target, and the per-pixel record of altered pixels."""

    input: Image
    target: Image
    mask_map: np.ndarray  # (h, w) bool


def partition_grid(img: Image, grid: GridSpec) -> list[tuple[int, int, int, int]]:
    """k^2 non-overlapping (y0, x0, y1, x1) rectangles tiling the image, row-major."""
    if img.height % grid.k or img.width % grid.k:
        raise ShapeError(
            f"grid k={grid.k} does not divide image size {img.height}x{img.width}"
        )
    ph, pw = img.height // grid.k, img.width // grid.k
    return [
        (gy * ph, gx * pw, (gy + 1) * ph, (gx + 1) * pw)
        for gy in range(grid.k)
        for gx in range(grid.k)
    ]


def sp_mask(img: Image, grid: GridSpec, noise: NoiseSpec, seed) -> tuple[Image, np.ndarray]:
    """Apply patch-wise salt-and-pepper corruption; deterministic in seed.

    Per pixel of a selected patch a single uniform draw u decides:
    u < p_salt -> salt, p_salt <= u < p_salt + p_pepper -> pepper, else
    untouched. seed may be an int or a numpy SeedSequence.
    """
    rects = partition_grid(img, grid)
    rng = np.random.default_rng(seed)
    out = img.data.copy()
    mask = np.zeros((img.height, img.width), dtype=bool)
    for y0, x0, y1, x1 in rects:
        if rng.random() >= noise.p_patch:
            continue
        u = rng.random((y1 - y0, x1 - x0))
        salt = u < noise.p_salt
        pepper = (u >= noise.p_salt) & (u < noise.p_salt + noise.p_pepper)
        out[:, y0:y1, x0:x1][:, salt] = 1.0
        out[:, y0:y1, x0:x1][:, pepper] = 0.0
        mask[y0:y1, x0:x1] = salt | pepper
    return Image(out), mask


def make_training_pair(
    x: Image, grid: GridSpec, noise: NoiseSpec, seed, masked_target: bool = False
) -> TrainingPair:
    """Corrupt x into a training input; the target is the clean x.

    masked_target=True applies the same mask to the target as well
    (the alternative reading where corruption hits input and ground
    truth uniformly), in which case input and target coincide.
    """
    masked, mask = sp_mask(x, grid, noise, seed)
    target = masked if masked_target else x
    return TrainingPair(masked, target, mask)
