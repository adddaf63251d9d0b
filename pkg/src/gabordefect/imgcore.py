"""Image and kernel types, 2D convolution, Gaussian blur, file I/O.

Everything downstream (filtering, masking, the network, scoring) works
on these types. Arithmetic is float64 throughout. Convolution is
correlation-oriented (no kernel flip); every kernel used here is either
symmetric or generated directly per orientation, so only consistency
matters, and the test oracles assume this orientation.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from . import _kernels
from .errors import (
    EmptyImageError,
    ShapeError,
    UnreadableImageError,
    UnsupportedImageError,
)
from .fsio import atomic_write_bytes

# activation tensors are plain (n, c, h, w) float64 arrays
Tensor4 = np.ndarray


@dataclass
class Image:
    """Channel-major image: data has shape (channels, height, width).

    Values from file loading or masking live in [0, 1]; filter
    responses are unconstrained reals. Treated as immutable after
    construction.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        if self.data.ndim != 3:
            raise ShapeError(f"image data must be 3-d (c, h, w), got {self.data.ndim}-d")
        c, h, w = self.data.shape
        if c not in (1, 3):
            raise ShapeError(f"image must have 1 or 3 channels, got {c}")
        if h < 1 or w < 1:
            raise EmptyImageError(f"image has zero extent: {h}x{w}")
        if self.data.dtype != np.float64:
            self.data = self.data.astype(np.float64)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass
class Kernel:
    """Odd-sided 2D kernel; data has shape (side_h, side_w)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        if self.data.ndim != 2:
            raise ShapeError(f"kernel data must be 2-d, got {self.data.ndim}-d")
        h, w = self.data.shape
        if h % 2 == 0 or w % 2 == 0:
            raise ShapeError(f"kernel sides must be odd, got {h}x{w}")
        if self.data.dtype != np.float64:
            self.data = self.data.astype(np.float64)

    @property
    def side_h(self) -> int:
        return self.data.shape[0]

    @property
    def side_w(self) -> int:
        return self.data.shape[1]


def load_image(path: str | os.PathLike, resize_to: tuple[int, int] | None = None) -> Image:
    """Load an 8-bit grayscale or RGB raster file into [0, 1] floats.

    Grayscale stays single-channel. Palette and alpha variants are
    flattened to RGB (or L); higher bit depths are rejected. If
    resize_to=(h, w) is given the image is bilinearly resampled to
    exactly that size.
    """
    try:
        with PILImage.open(path) as pil:
            pil.load()
            mode = pil.mode
            if pil.width < 1 or pil.height < 1:
                raise EmptyImageError(f"zero-sized image: {path}")
            if mode in ("L", "RGB"):
                pass
            elif mode in ("P", "RGBA", "CMYK", "YCbCr"):
                pil = pil.convert("RGB")
            elif mode == "LA":
                pil = pil.convert("L")
            else:
                raise UnsupportedImageError(
                    f"unsupported image mode {mode!r} (8-bit grayscale/RGB only): {path}"
                )
            arr = np.asarray(pil, dtype=np.float64) / 255.0
    except FileNotFoundError as e:
        raise UnreadableImageError(f"cannot read image file: {path}") from e
    except (UnidentifiedImageError, OSError) as e:
        raise UnreadableImageError(f"cannot decode image file: {path}") from e

    if arr.ndim == 2:
        arr = arr[None, :, :]
    else:
        arr = np.ascontiguousarray(arr.transpose(2, 0, 1))
    img = Image(arr)
    if resize_to is not None:
        img = bilinear_resize(img, resize_to[0], resize_to[1])
    return img


def save_image(img: Image, path: str | os.PathLike) -> None:
    """Write an image as 8-bit PNG, clamping to [0, 1]. Atomic."""
    arr = np.clip(img.data, 0.0, 1.0)
    arr = np.rint(arr * 255.0).astype(np.uint8)
    if img.channels == 1:
        pil = PILImage.fromarray(arr[0], mode="L")
    else:
        pil = PILImage.fromarray(arr.transpose(1, 2, 0), mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def to_grayscale(img: Image) -> Image:
    """Luminance conversion 0.299 R + 0.587 G + 0.114 B; 1-channel input passes through."""
    if img.channels == 1:
        return img
    r, g, b = img.data[0], img.data[1], img.data[2]
    return Image((0.299 * r + 0.587 * g + 0.114 * b)[None, :, :])


def ensure_rgb(img: Image) -> Image:
    """Replicate a single-channel image to 3 channels; 3-channel passes through.

    The network consumes 3-channel input, so grayscale datasets go
    through this before batching.
    """
    if img.channels == 3:
        return img
    return Image(np.repeat(img.data, 3, axis=0))


def bilinear_taps(n_src: int, n_dst: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-axis resampling taps (i0, i1, w0, w1) for half-pixel-centred bilinear.

    dst pixel j samples source coordinate (j + 0.5) * n_src / n_dst - 0.5,
    clamped to the valid range. Shared by load-time resizing and the
    decoder's 2x upsampling so both use one convention.
    """
    src = (np.arange(n_dst, dtype=np.float64) + 0.5) * (n_src / n_dst) - 0.5
    src = np.clip(src, 0.0, n_src - 1.0)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_src - 1)
    t = src - i0
    return i0, i1, 1.0 - t, t


def bilinear_resize(img: Image, out_h: int, out_w: int) -> Image:
    """Resample to exactly (out_h, out_w) with bilinear interpolation."""
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"resize target must be positive, got {out_h}x{out_w}")
    iy0, iy1, wy0, wy1 = bilinear_taps(img.height, out_h)
    ix0, ix1, wx0, wx1 = bilinear_taps(img.width, out_w)
    d = img.data
    top = d[:, iy0, :][:, :, ix0] * wx0 + d[:, iy0, :][:, :, ix1] * wx1
    bot = d[:, iy1, :][:, :, ix0] * wx0 + d[:, iy1, :][:, :, ix1] * wx1
    out = top * wy0[None, :, None] + bot * wy1[None, :, None]
    return Image(np.ascontiguousarray(out))


def conv2d(img: Image, kernel: Kernel, padding: str = "reflect") -> Image:
    """Same-size 2D correlation of a single-channel image.

    output(y, x) = sum_{u,v} kernel(u, v) * padded(y + u - cy, x + v - cx)
    with (cy, cx) the kernel centre. padding is 'reflect' (mirror
    without edge repeat) or 'zero'. Reflect padding needs the half
    kernel to fit inside the image, i.e. the kernel side must not
    exceed twice the image extent.
    """
    if img.channels != 1:
        raise ShapeError(f"conv2d expects a single-channel image, got {img.channels} channels")
    if padding not in ("reflect", "zero"):
        raise ValueError(f"padding must be 'reflect' or 'zero', got {padding!r}")
    h, w = img.height, img.width
    kh, kw = kernel.side_h, kernel.side_w
    if padding == "reflect" and (kh // 2 > h - 1 or kw // 2 > w - 1):
        raise ShapeError(
            f"kernel {kh}x{kw} larger than twice the image extent {h}x{w} "
            "with reflect padding"
        )
    plane = np.ascontiguousarray(img.data[0])
    k = np.ascontiguousarray(kernel.data)
    out = _kernels.corr2d(plane, k, padding == "zero")
    return Image(out[None, :, :])


def gaussian_kernel(size: int, sigma: float) -> Kernel:
    """size x size Gaussian, entries exp(-(dx^2+dy^2)/(2 sigma^2)), normalized to sum 1."""
    if size % 2 == 0 or size < 1:
        raise ShapeError(f"gaussian kernel size must be odd and positive, got {size}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    r = size // 2
    d = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(d[:, None] ** 2 + d[None, :] ** 2) / (2.0 * sigma * sigma))
    return Kernel(g / g.sum())


_BLUR_SIZE = 11
_BLUR_SIGMA = 5.0
_blur_kernel: Kernel | None = None


def gaussian_blur(img: Image) -> Image:
    """Per-channel convolution with the fixed (11, sigma=5) Gaussian, reflect padding."""
    global _blur_kernel
    if _blur_kernel is None:
        _blur_kernel = gaussian_kernel(_BLUR_SIZE, _BLUR_SIGMA)
    planes = [
        conv2d(Image(img.data[c : c + 1]), _blur_kernel, padding="reflect").data[0]
        for c in range(img.channels)
    ]
    return Image(np.stack(planes, axis=0))
