"""Differentiable array primitives for the reconstruction network.

Each forward has a matching closed-form reverse-mode backward; the
network assembles these into its computation graph by hand. All
tensors are float64 (n, c, h, w) unless stated otherwise. Backwards
recompute cheap index structures (pool argmax, padding) instead of
caching them; value caches are the caller's job.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .errors import ShapeError
from .imgcore import bilinear_taps

# ---------------------------------------------------------------- conv

def conv2d_zero(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Stride-1 same convolution with zero padding, correlation orientation.

    x (n, ci, h, wd), w (co, ci, kh, kw) with odd kh/kw, b (co,).
    """
    n, ci, h, wd = x.shape
    co, ci2, kh, kw = w.shape
    if ci2 != ci:
        raise ShapeError(f"conv weight expects {ci2} input channels, got {ci}")
    py, px = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (0, 0), (py, py), (px, px)))
    acc = np.zeros((co, n, h, wd), dtype=np.float64)
    for u in range(kh):
        for v in range(kw):
            acc += np.tensordot(w[:, :, u, v], xp[:, :, u : u + h, v : v + wd], axes=([1], [1]))
    return acc.transpose(1, 0, 2, 3) + b[None, :, None, None]


def conv2d_zero_bwd(
    x: np.ndarray, w: np.ndarray, g: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv2d_zero: returns (gx, gw, gb) for upstream g (n, co, h, wd)."""
    n, ci, h, wd = x.shape
    co, _, kh, kw = w.shape
    py, px = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (0, 0), (py, py), (px, px)))
    gb = g.sum(axis=(0, 2, 3))
    gw = np.empty_like(w)
    gxp = np.zeros_like(xp)
    for u in range(kh):
        for v in range(kw):
            sl = xp[:, :, u : u + h, v : v + wd]
            gw[:, :, u, v] = np.tensordot(g, sl, axes=([0, 2, 3], [0, 2, 3]))
            gxp[:, :, u : u + h, v : v + wd] += np.tensordot(
                g, w[:, :, u, v], axes=([1], [0])
            ).transpose(0, 3, 1, 2)
    gx = gxp[:, :, py : py + h, px : px + wd]
    return np.ascontiguousarray(gx), gw, gb


# --------------------------------------------------------- patch embed

def patch_embed(x: np.ndarray, w: np.ndarray, b: np.ndarray, patch: int) -> np.ndarray:
    """Non-overlapping patch convolution: kernel = stride = patch.

    x (n, ci, h, wd) with h, wd divisible by patch; w (e, ci, patch, patch).
    Returns (n, e, h/patch, wd/patch).
    """
    n, ci, h, wd = x.shape
    e = w.shape[0]
    if h % patch or wd % patch:
        raise ShapeError(f"patch size {patch} does not divide feature map {h}x{wd}")
    qh, qw = h // patch, wd // patch
    cols = (
        x.reshape(n, ci, qh, patch, qw, patch)
        .transpose(0, 2, 4, 1, 3, 5)
        .reshape(n, qh, qw, ci * patch * patch)
    )
    out = cols @ w.reshape(e, -1).T + b
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def patch_embed_bwd(
    x: np.ndarray, w: np.ndarray, g: np.ndarray, patch: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n, ci, h, wd = x.shape
    e = w.shape[0]
    qh, qw = h // patch, wd // patch
    cols = (
        x.reshape(n, ci, qh, patch, qw, patch)
        .transpose(0, 2, 4, 1, 3, 5)
        .reshape(n, qh, qw, ci * patch * patch)
    )
    gq = g.transpose(0, 2, 3, 1)  # (n, qh, qw, e)
    gb = gq.sum(axis=(0, 1, 2))
    gw = np.tensordot(gq, cols, axes=([0, 1, 2], [0, 1, 2])).reshape(w.shape)
    gcols = gq @ w.reshape(e, -1)
    gx = (
        gcols.reshape(n, qh, qw, ci, patch, patch)
        .transpose(0, 3, 1, 4, 2, 5)
        .reshape(n, ci, h, wd)
    )
    return np.ascontiguousarray(gx), gw, gb


# -------------------------------------------------------- activations

def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_bwd(out: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Backward through ReLU given the forward *output* (mask out > 0)."""
    return g * (out > 0.0)


_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_erf = np.vectorize(math.erf, otypes=[np.float64])


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact (erf-form) GELU: x * Phi(x)."""
    return 0.5 * x * (1.0 + _erf(x / _SQRT2))


def gelu_bwd(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    phi = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
    cdf = 0.5 * (1.0 + _erf(x / _SQRT2))
    return g * (cdf + x * phi)


# -------------------------------------------------------------- pool

def maxpool2(x: np.ndarray) -> np.ndarray:
    """2x2 max pooling, stride 2. Sides must be even."""
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2 needs even sides, got {h}x{w}")
    return _pool_windows(x).max(axis=-1)


def maxpool2_bwd(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Routes g to each window's argmax (first index on ties)."""
    n, c, h, w = x.shape
    win = _pool_windows(x)
    idx = win.argmax(axis=-1)
    gwin = np.zeros_like(win)
    np.put_along_axis(gwin, idx[..., None], g[..., None], axis=-1)
    return (
        gwin.reshape(n, c, h // 2, w // 2, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h, w)
    )


def _pool_windows(x: np.ndarray) -> np.ndarray:
    n, c, h, w = x.shape
    return (
        x.reshape(n, c, h // 2, 2, w // 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h // 2, w // 2, 4)
    )


# --------------------------------------------------------- upsampling

_up_matrices: dict[int, np.ndarray] = {}


def _up_matrix(n_src: int) -> np.ndarray:
    """Dense (2n, n) matrix of the half-pixel bilinear 2x upsampling."""
    u = _up_matrices.get(n_src)
    if u is None:
        i0, i1, w0, w1 = bilinear_taps(n_src, 2 * n_src)
        u = np.zeros((2 * n_src, n_src), dtype=np.float64)
        r = np.arange(2 * n_src)
        u[r, i0] += w0
        u[r, i1] += w1
        _up_matrices[n_src] = u
    return u


def upsample2(x: np.ndarray) -> np.ndarray:
    """Bilinear 2x upsampling with half-pixel centres (matches load-time resize)."""
    n, c, h, w = x.shape
    uy, ux = _up_matrix(h), _up_matrix(w)
    tmp = np.tensordot(x, uy, axes=([2], [1])).transpose(0, 1, 3, 2)  # (n,c,2h,w)
    return np.ascontiguousarray(np.tensordot(tmp, ux, axes=([3], [1])))


def upsample2_bwd(g: np.ndarray) -> np.ndarray:
    """Adjoint of upsample2; g is (n, c, 2h, 2w), result (n, c, h, w)."""
    n, c, h2, w2 = g.shape
    uy, ux = _up_matrix(h2 // 2), _up_matrix(w2 // 2)
    tmp = np.tensordot(g, ux, axes=([3], [0]))  # (n,c,2h,w)
    return np.ascontiguousarray(np.tensordot(tmp, uy, axes=([2], [0])).transpose(0, 1, 3, 2))


# ------------------------------------------------------------- linear

def linear(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """x (..., d) @ w.T + b with w (o, d)."""
    return x @ w.T + b


def linear_bwd(
    x: np.ndarray, w: np.ndarray, g: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    gx = g @ w
    gw = np.tensordot(g.reshape(-1, g.shape[-1]), x.reshape(-1, x.shape[-1]), axes=([0], [0]))
    gb = g.reshape(-1, g.shape[-1]).sum(axis=0)
    return gx, gw, gb


# ---------------------------------------------------------- attention

def softmax_rows(s: np.ndarray) -> np.ndarray:
    """Row-wise softmax over the last axis, with max subtraction."""
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def softmax_rows_bwd(a: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Backward given the softmax output a."""
    return a * (g - (g * a).sum(axis=-1, keepdims=True))


def attention_core(q: np.ndarray, k: np.ndarray, v: np.ndarray):
    """softmax(q k^T / sqrt(d)) v over the last two axes.

    q, k, v (..., p, d). Returns (out, a) with the attention weights a
    kept for backward.
    """
    d = q.shape[-1]
    s = q @ np.swapaxes(k, -1, -2) / math.sqrt(d)
    a = softmax_rows(s)
    return a @ v, a


def attention_core_bwd(q, k, v, a, g):
    d = q.shape[-1]
    gv = np.swapaxes(a, -1, -2) @ g
    ga = g @ np.swapaxes(v, -1, -2)
    gs = softmax_rows_bwd(a, ga) / math.sqrt(d)
    gq = gs @ k
    gk = np.swapaxes(gs, -1, -2) @ q
    return gq, gk, gv


def attention(q: np.ndarray, k: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Single-head attention on (p, d) matrices; rejects non-finite input."""
    for name, m in (("q", q), ("k", k), ("v", v)):
        if not np.isfinite(m).all():
            raise ValueError(f"attention input {name} contains non-finite values")
    if q.shape != k.shape or q.shape != v.shape:
        raise ShapeError(f"attention expects equal shapes, got {q.shape}, {k.shape}, {v.shape}")
    out, _ = attention_core(q, k, v)
    return out


# --------------------------------------------------------------- blur

def blur_same_reflect(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Per-plane same-size correlation with reflect padding. x (n, c, h, w)."""
    n, c, h, w = x.shape
    out = np.empty_like(x)
    for i in range(n):
        for j in range(c):
            out[i, j] = _kernels.corr2d(np.ascontiguousarray(x[i, j]), kernel, False)
    return out


def blur_same_reflect_bwd(g: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Adjoint of blur_same_reflect: valid-correlation adjoint, then the
    reflect padding folded back onto interior pixels."""
    n, c, h, w = g.shape
    kh, kw = kernel.shape
    py, px = kh // 2, kw // 2
    gxp = np.zeros((n, c, h + 2 * py, w + 2 * px), dtype=np.float64)
    for u in range(kh):
        for v in range(kw):
            gxp[:, :, u : u + h, v : v + w] += kernel[u, v] * g
    fy = _fold_matrix(h, py)
    fx = _fold_matrix(w, px)
    return np.einsum("ij,ncjk,lk->ncil", fy, gxp, fx, optimize=True)


_fold_matrices: dict[tuple[int, int], np.ndarray] = {}


def _fold_matrix(n: int, pad: int) -> np.ndarray:
    """Dense (n, n + 2 pad) scatter matrix folding reflect padding back."""
    f = _fold_matrices.get((n, pad))
    if f is None:
        src = np.abs(np.arange(-pad, n + pad))
        src = np.where(src >= n, 2 * n - 2 - src, src)
        f = np.zeros((n, n + 2 * pad), dtype=np.float64)
        f[src, np.arange(n + 2 * pad)] = 1.0
        _fold_matrices[(n, pad)] = f
    return f
