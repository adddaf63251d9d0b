"""Gabor filter bank construction, application, and the defect score.

A bank is one (kernel size, sigma, lambda, gamma) parameterization
instantiated at 8 orientations theta_k = (pi/8) k + pi/16. Filtering a
reconstructed image with the bank gives 8 response maps; the per-pixel
ratio of summed responses to the count of positive responses is the
averaged response map, and its spatial maximum is the image's defect
score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .imgcore import Image, Kernel, conv2d

N_ORIENTATIONS = 8


@dataclass(frozen=True)
class GaborParams:
    """Filter parameterization: odd kernel side, envelope width sigma,
    wavelength lambd, aspect ratio gamma. All in pixels except gamma."""

    kernel_size: int
    sigma: float
    lambd: float
    gamma: float

    def __post_init__(self) -> None:
        if self.kernel_size < 3 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd and >= 3, got {self.kernel_size}")
        if self.sigma <= 0 or self.lambd <= 0 or self.gamma <= 0:
            raise ValueError(
                f"sigma, lambda, gamma must be positive, got "
                f"({self.sigma}, {self.lambd}, {self.gamma})"
            )


@dataclass(frozen=True)
class GaborBank:
    params: GaborParams
    kernels: tuple[Kernel, ...]

    def __post_init__(self) -> None:
        if len(self.kernels) != N_ORIENTATIONS:
            raise ShapeError(f"bank must hold {N_ORIENTATIONS} kernels, got {len(self.kernels)}")


@dataclass
class ResponseStack:
    """8 equally sized single-channel response maps, one per orientation."""

    responses: tuple[Image, ...]

    def __post_init__(self) -> None:
        if len(self.responses) != N_ORIENTATIONS:
            raise ShapeError(
                f"stack must hold {N_ORIENTATIONS} responses, got {len(self.responses)}"
            )
        shapes = {r.data.shape for r in self.responses}
        if len(shapes) != 1:
            raise ShapeError(f"responses differ in shape: {sorted(shapes)}")
        if self.responses[0].channels != 1:
            raise ShapeError("responses must be single-channel")

    def as_array(self) -> np.ndarray:
        """(8, h, w) view of the stack."""
        return np.stack([r.data[0] for r in self.responses], axis=0)


def orientation(k: int) -> float:
    """theta_k = (pi/8) k + pi/16 for k in 0..7."""
    if not 0 <= k < N_ORIENTATIONS:
        raise ValueError(f"orientation index must be in 0..7, got {k}")
    return (math.pi / 8.0) * k + math.pi / 16.0


def gabor_kernel(p: GaborParams, theta: float) -> Kernel:
    """Oriented Gabor kernel, no normalization.

    For integer offsets (x, y) from the centre, with
    x' = x cos(theta) + y sin(theta) and y' = -x sin(theta) + y cos(theta):
    entry = exp(-(x'^2 + gamma^2 y'^2) / (2 sigma^2)) * cos(2 pi x' / lambd).
    """
    r = p.kernel_size // 2
    off = np.arange(-r, r + 1, dtype=np.float64)
    # x varies along columns, y along rows
    x = off[None, :]
    y = off[:, None]
    ct, st = math.cos(theta), math.sin(theta)
    xr = x * ct + y * st
    yr = -x * st + y * ct
    env = np.exp(-(xr**2 + (p.gamma**2) * yr**2) / (2.0 * p.sigma**2))
    return Kernel(env * np.cos(2.0 * math.pi * xr / p.lambd))


def build_bank(p: GaborParams) -> GaborBank:
    """Instantiate the parameterization at all 8 orientations."""
    return GaborBank(p, tuple(gabor_kernel(p, orientation(k)) for k in range(N_ORIENTATIONS)))


def apply_bank(img: Image, bank: GaborBank) -> ResponseStack:
    """Correlate a single-channel image with each of the 8 kernels, reflect padding."""
    if img.channels != 1:
        raise ShapeError("apply_bank expects a single-channel image; convert to grayscale first")
    return ResponseStack(tuple(conv2d(img, k, padding="reflect") for k in bank.kernels))


def average_response(stack: ResponseStack) -> Image:
    """Per-pixel ratio of summed responses to the count of positive responses.

    A(x, y) = (sum_k R_k) / (sum_k 1{R_k > 0}); pixels where no response
    is positive get 0. The numerator keeps negative responses (the
    ratio is taken literally, not positive-part).
    """
    r = stack.as_array()
    num = r.sum(axis=0)
    den = (r > 0.0).sum(axis=0).astype(np.float64)
    out = np.divide(num, den, out=np.zeros_like(num), where=den > 0.0)
    return Image(out[None, :, :])


def dfscore(stack: ResponseStack) -> float:
    """Image-level defect score: spatial max of the averaged response, floored at 0."""
    return max(float(average_response(stack).data.max()), 0.0)


PRESETS: dict[str, GaborParams] = {
    "carpet": GaborParams(27, 12.0, 13.0, 0.8),
    "grid": GaborParams(23, 7.0, 4.0, 1.0),
    "leather": GaborParams(15, 11.0, 13.0, 1.8),
    "tile": GaborParams(7, 2.0, 5.0, 1.0),
    "wood": GaborParams(21, 14.0, 8.0, 3.0),
    "crack": GaborParams(21, 5.0, 10.0, 1.2),
    "marble": GaborParams(15, 11.0, 13.0, 1.8),
}


def preset_for(dataset: str) -> GaborParams:
    """Named per-texture parameter preset."""
    try:
        return PRESETS[dataset]
    except KeyError:
        valid = ", ".join(sorted(PRESETS))
        raise ValueError(f"unknown preset {dataset!r}; valid names: {valid}") from None
