"""U-Net-ViT reconstruction network with manual reverse-mode gradients.

Shape plan (normative for this artifact):
  encoder   depth stages of conv3x3(zero pad) + ReLU at widths
            base_width * 2^i, with a 2x2 max-pool after every stage but
            the last; image side S shrinks to the encoder map
            M = S / 2^(depth-1)
  vit       patch convolution (kernel = stride = patch_size) into
            embed_dim channels + ReLU, flattened to (n, P, E) tokens;
            multi-head self-attention with residual; FFN
            (linear -> GELU -> linear, hidden = ffn_mult * E) with
            residual; reshaped back to (n, E, q, q) with q = M / patch.
            No positional embedding, no layer norm. With use_vit off
            the patch convolution acts as a plain adapter and the
            attention/FFN parameters do not exist.
  bottleneck conv3x3 E -> 2E + ReLU + 2x2 max-pool (q must be even)
  decoder   depth + log2(patch_size) bilinear x2 upsamplings, each
            followed by conv3x3 + ReLU; encoder stage outputs are
            concatenated at matching resolutions before the conv;
            output widths max(2E >> (1 + i//2), base_width)
  head      1x1 conv to 3 channels, no activation

At the defaults this walks exactly through (N,64,256,256),
(N,64,128,128), (N,512,32,32), (N,4,512) tokens, (N,512,2,2),
(N,1024,1,1), and decodes 1024 -> 512,512,256,256,128,128,64,64 -> 3.
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import ops
from .errors import CheckpointError, ConfigError, ShapeError, TrainingError
from .fsio import atomic_write_bytes

CHECKPOINT_MAGIC = b"GBDF"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    image_size: int = 256
    base_width: int = 64
    depth: int = 4
    patch_size: int = 16
    embed_dim: int = 512
    num_heads: int = 8
    ffn_mult: int = 4
    use_vit: bool = True

    def __post_init__(self) -> None:
        for name in ("image_size", "base_width", "depth", "patch_size",
                     "embed_dim", "num_heads", "ffn_mult"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        pool_factor = 1 << (self.depth - 1)
        if self.image_size % pool_factor:
            raise ConfigError(
                f"image_size {self.image_size} is not divisible by "
                f"2^(depth-1) = {pool_factor}"
            )
        if self.patch_size & (self.patch_size - 1):
            raise ConfigError(
                f"patch_size {self.patch_size} must be a power of two "
                "(the decoder doubles resolution)"
            )
        m = self.image_size // pool_factor
        if m % self.patch_size:
            raise ConfigError(
                f"encoder map side {m} (image_size / 2^(depth-1)) is not "
                f"divisible by patch_size {self.patch_size}"
            )
        q = m // self.patch_size
        if q < 2 or q % 2:
            raise ConfigError(
                f"patch grid side {q} must be even and >= 2 "
                "(the bottleneck pools 2x2)"
            )
        if self.embed_dim % self.num_heads:
            raise ConfigError(
                f"embed_dim {self.embed_dim} is not divisible by "
                f"num_heads {self.num_heads}"
            )

    @property
    def encoder_map(self) -> int:
        """Side length M of the final encoder feature map."""
        return self.image_size >> (self.depth - 1)

    @property
    def patch_grid(self) -> int:
        """Side length q of the token grid."""
        return self.encoder_map // self.patch_size

    @property
    def n_upsamples(self) -> int:
        return self.depth + int(math.log2(self.patch_size))


@dataclass
class ForwardTrace:
    """Named stage outputs plus opaque caches for backward."""

    stages: dict[str, np.ndarray]
    caches: dict[str, object]

    def shape_of(self, name: str) -> tuple[int, ...]:
        return tuple(self.stages[name].shape)


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Every parameter's shape, in a fixed deterministic order."""
    shapes: dict[str, tuple[int, ...]] = {}
    cin = 3
    for i in range(cfg.depth):
        cout = cfg.base_width << i
        shapes[f"enc{i}.w"] = (cout, cin, 3, 3)
        shapes[f"enc{i}.b"] = (cout,)
        cin = cout
    e = cfg.embed_dim
    shapes["patch_embed.w"] = (e, cin, cfg.patch_size, cfg.patch_size)
    shapes["patch_embed.b"] = (e,)
    if cfg.use_vit:
        for nm in ("wq", "wk", "wv", "wo"):
            shapes[f"attn.{nm}.w"] = (e, e)
            shapes[f"attn.{nm}.b"] = (e,)
        hidden = cfg.ffn_mult * e
        shapes["ffn.w1.w"] = (hidden, e)
        shapes["ffn.w1.b"] = (hidden,)
        shapes["ffn.w2.w"] = (e, hidden)
        shapes["ffn.w2.b"] = (e,)
    shapes["bottleneck.w"] = (2 * e, e, 3, 3)
    shapes["bottleneck.b"] = (2 * e,)
    cur = 2 * e
    q = cfg.patch_grid
    m = cfg.encoder_map
    for i in range(cfg.n_upsamples):
        r = q << i  # resolution after this upsampling
        in_ch = cur
        if r >= m:
            j = int(math.log2(cfg.image_size // r))
            in_ch += cfg.base_width << j
        out_ch = max((2 * e) >> (1 + i // 2), cfg.base_width)
        shapes[f"dec{i}.w"] = (out_ch, in_ch, 3, 3)
        shapes[f"dec{i}.b"] = (out_ch,)
        cur = out_ch
    shapes["head.w"] = (3, cur, 1, 1)
    shapes["head.b"] = (3,)
    return shapes


def init_params(cfg: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    """Deterministic initialization: conv weights ~ N(0, sqrt(2/fan_in)),
    projection/FFN weights ~ N(0, 0.02), biases zero."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape, dtype=np.float64)
        elif len(shape) == 4:
            fan_in = shape[1] * shape[2] * shape[3]
            params[name] = rng.standard_normal(shape) * math.sqrt(2.0 / fan_in)
        else:
            params[name] = rng.standard_normal(shape) * 0.02
    return params


def _mhsa_forward(params, cfg, tokens, stages, caches):
    n, p, e = tokens.shape
    h = cfg.num_heads
    dk = e // h
    qm = ops.linear(tokens, params["attn.wq.w"], params["attn.wq.b"])
    km = ops.linear(tokens, params["attn.wk.w"], params["attn.wk.b"])
    vm = ops.linear(tokens, params["attn.wv.w"], params["attn.wv.b"])
    qh = qm.reshape(n, p, h, dk).transpose(0, 2, 1, 3)
    kh = km.reshape(n, p, h, dk).transpose(0, 2, 1, 3)
    vh = vm.reshape(n, p, h, dk).transpose(0, 2, 1, 3)
    oh, a = ops.attention_core(qh, kh, vh)
    merged = np.ascontiguousarray(oh.transpose(0, 2, 1, 3)).reshape(n, p, e)
    out = tokens + ops.linear(merged, params["attn.wo.w"], params["attn.wo.b"])
    stages["attn"] = out
    caches["attn"] = (qh, kh, vh, a, merged)
    return out


def _mhsa_backward(params, cfg, trace, g, grads):
    tokens = trace.stages["tokens"]
    qh, kh, vh, a, merged = trace.caches["attn"]
    n, p, e = tokens.shape
    h = cfg.num_heads
    dk = e // h
    gmerged, grads["attn.wo.w"], grads["attn.wo.b"] = ops.linear_bwd(
        merged, params["attn.wo.w"], g
    )
    goh = gmerged.reshape(n, p, h, dk).transpose(0, 2, 1, 3)
    gqh, gkh, gvh = ops.attention_core_bwd(qh, kh, vh, a, goh)
    gq = np.ascontiguousarray(gqh.transpose(0, 2, 1, 3)).reshape(n, p, e)
    gk = np.ascontiguousarray(gkh.transpose(0, 2, 1, 3)).reshape(n, p, e)
    gv = np.ascontiguousarray(gvh.transpose(0, 2, 1, 3)).reshape(n, p, e)
    g1, grads["attn.wq.w"], grads["attn.wq.b"] = ops.linear_bwd(tokens, params["attn.wq.w"], gq)
    g2, grads["attn.wk.w"], grads["attn.wk.b"] = ops.linear_bwd(tokens, params["attn.wk.w"], gk)
    g3, grads["attn.wv.w"], grads["attn.wv.b"] = ops.linear_bwd(tokens, params["attn.wv.w"], gv)
    return g + g1 + g2 + g3  # residual path plus the three projections


def _ffn_forward(params, tokens, stages, caches):
    h1 = ops.linear(tokens, params["ffn.w1.w"], params["ffn.w1.b"])
    act = ops.gelu(h1)
    out = tokens + ops.linear(act, params["ffn.w2.w"], params["ffn.w2.b"])
    stages["vit_tokens"] = out
    caches["ffn"] = (tokens, h1, act)
    return out


def _ffn_backward(params, trace, g, grads):
    tokens, h1, act = trace.caches["ffn"]
    gact, grads["ffn.w2.w"], grads["ffn.w2.b"] = ops.linear_bwd(act, params["ffn.w2.w"], g)
    gh1 = ops.gelu_bwd(h1, gact)
    gt, grads["ffn.w1.w"], grads["ffn.w1.b"] = ops.linear_bwd(tokens, params["ffn.w1.w"], gh1)
    return g + gt


def forward(
    params: dict[str, np.ndarray], cfg: ModelConfig, batch: np.ndarray
) -> tuple[np.ndarray, ForwardTrace]:
    """Run the network; returns the reconstruction and the full trace."""
    s = cfg.image_size
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 4 or x.shape[1:] != (3, s, s):
        raise ShapeError(f"forward expects (n, 3, {s}, {s}), got {tuple(x.shape)}")
    stages: dict[str, np.ndarray] = {"input": x}
    caches: dict[str, object] = {}
    trace = ForwardTrace(stages, caches)

    cur = x
    for i in range(cfg.depth):
        cur = ops.relu(ops.conv2d_zero(cur, params[f"enc{i}.w"], params[f"enc{i}.b"]))
        stages[f"enc{i}"] = cur
        if i < cfg.depth - 1:
            cur = ops.maxpool2(cur)
            stages[f"pool{i}"] = cur

    pe = ops.relu(
        ops.patch_embed(cur, params["patch_embed.w"], params["patch_embed.b"], cfg.patch_size)
    )
    stages["patch_embed"] = pe

    n = x.shape[0]
    q = cfg.patch_grid
    e = cfg.embed_dim
    if cfg.use_vit:
        tokens = np.ascontiguousarray(pe.reshape(n, e, q * q).transpose(0, 2, 1))
        stages["tokens"] = tokens
        attn_out = _mhsa_forward(params, cfg, tokens, stages, caches)
        vit_tokens = _ffn_forward(params, attn_out, stages, caches)
        vit_map = np.ascontiguousarray(vit_tokens.transpose(0, 2, 1)).reshape(n, e, q, q)
    else:
        vit_map = pe
    stages["vit_map"] = vit_map

    bn = ops.relu(ops.conv2d_zero(vit_map, params["bottleneck.w"], params["bottleneck.b"]))
    stages["bn_act"] = bn
    cur = ops.maxpool2(bn)
    stages["bottleneck"] = cur

    m = cfg.encoder_map
    for i in range(cfg.n_upsamples):
        up = ops.upsample2(cur)
        r = q << i
        if r >= m:
            j = int(math.log2(s // r))
            cat = np.concatenate([up, stages[f"enc{j}"]], axis=1)
        else:
            cat = up
        stages[f"dec{i}_in"] = cat
        cur = ops.relu(ops.conv2d_zero(cat, params[f"dec{i}.w"], params[f"dec{i}.b"]))
        stages[f"dec{i}"] = cur

    out = ops.conv2d_zero(cur, params["head.w"], params["head.b"])
    stages["output"] = out
    return out, trace


def backward(
    params: dict[str, np.ndarray],
    cfg: ModelConfig,
    trace: ForwardTrace,
    grad_output: np.ndarray,
) -> dict[str, np.ndarray]:
    """Exact reverse-mode gradients of every parameter for the traced batch."""
    if trace is None or "output" not in trace.stages:
        raise TrainingError("backward requires the forward trace of the same batch")
    g = np.asarray(grad_output, dtype=np.float64)
    if g.shape != trace.stages["output"].shape:
        raise ShapeError(
            f"gradient shape {tuple(g.shape)} does not match output "
            f"{trace.shape_of('output')}"
        )
    s = cfg.image_size
    q = cfg.patch_grid
    m = cfg.encoder_map
    e = cfg.embed_dim
    n = g.shape[0]
    grads: dict[str, np.ndarray] = {}

    n_up = cfg.n_upsamples
    gcur, grads["head.w"], grads["head.b"] = ops.conv2d_zero_bwd(
        trace.stages[f"dec{n_up - 1}"], params["head.w"], g
    )

    skip_grads: dict[int, np.ndarray] = {}
    for i in reversed(range(n_up)):
        gcur = ops.relu_bwd(trace.stages[f"dec{i}"], gcur)
        gcat, grads[f"dec{i}.w"], grads[f"dec{i}.b"] = ops.conv2d_zero_bwd(
            trace.stages[f"dec{i}_in"], params[f"dec{i}.w"], gcur
        )
        r = q << i
        if r >= m:
            j = int(math.log2(s // r))
            c_skip = trace.stages[f"enc{j}"].shape[1]
            skip_grads[j] = gcat[:, gcat.shape[1] - c_skip :]
            gup = gcat[:, : gcat.shape[1] - c_skip]
        else:
            gup = gcat
        gcur = ops.upsample2_bwd(np.ascontiguousarray(gup))

    gcur = ops.maxpool2_bwd(trace.stages["bn_act"], gcur)
    gcur = ops.relu_bwd(trace.stages["bn_act"], gcur)
    g_vitmap, grads["bottleneck.w"], grads["bottleneck.b"] = ops.conv2d_zero_bwd(
        trace.stages["vit_map"], params["bottleneck.w"], gcur
    )

    if cfg.use_vit:
        g_tokens = np.ascontiguousarray(g_vitmap.reshape(n, e, q * q).transpose(0, 2, 1))
        g_tokens = _ffn_backward(params, trace, g_tokens, grads)
        g_tokens = _mhsa_backward(params, cfg, trace, g_tokens, grads)
        g_pe = np.ascontiguousarray(g_tokens.transpose(0, 2, 1)).reshape(n, e, q, q)
    else:
        g_pe = g_vitmap

    g_pe = ops.relu_bwd(trace.stages["patch_embed"], g_pe)
    gcur, grads["patch_embed.w"], grads["patch_embed.b"] = ops.patch_embed_bwd(
        trace.stages[f"enc{cfg.depth - 1}"], params["patch_embed.w"], g_pe, cfg.patch_size
    )

    for i in reversed(range(cfg.depth)):
        if i in skip_grads:
            gcur = gcur + skip_grads[i]
        gcur = ops.relu_bwd(trace.stages[f"enc{i}"], gcur)
        conv_in = trace.stages[f"pool{i - 1}"] if i > 0 else trace.stages["input"]
        gcur, grads[f"enc{i}.w"], grads[f"enc{i}.b"] = ops.conv2d_zero_bwd(
            conv_in, params[f"enc{i}.w"], gcur
        )
        if i > 0:
            gcur = ops.maxpool2_bwd(trace.stages[f"enc{i - 1}"], gcur)
    return grads


def save_checkpoint(path, params: dict[str, np.ndarray], cfg: ModelConfig) -> None:
    """Binary checkpoint: magic, version, config JSON, then each parameter
    as (name, shape, float32 little-endian values). Written atomically."""
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", CHECKPOINT_VERSION))
    cfg_json = json.dumps(asdict(cfg), sort_keys=True).encode()
    buf.write(struct.pack("<I", len(cfg_json)))
    buf.write(cfg_json)
    names = list(param_shapes(cfg))
    buf.write(struct.pack("<I", len(names)))
    for name in names:
        if name not in params:
            raise CheckpointError(f"cannot save: missing parameter {name}")
        arr = params[name]
        nb = name.encode()
        buf.write(struct.pack("<H", len(nb)))
        buf.write(nb)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    atomic_write_bytes(path, buf.getvalue())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], ModelConfig]:
    """Read a checkpoint, validating version and every parameter shape."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as err:
        raise CheckpointError(f"cannot read checkpoint: {path}: {err}") from err
    buf = io.BytesIO(data)

    def take(count: int) -> bytes:
        b = buf.read(count)
        if len(b) != count:
            raise CheckpointError(f"truncated checkpoint: {path}")
        return b

    if take(4) != CHECKPOINT_MAGIC:
        raise CheckpointError(f"not a checkpoint file (bad magic): {path}")
    (version,) = struct.unpack("<I", take(4))
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )
    (cfg_len,) = struct.unpack("<I", take(4))
    try:
        cfg_dict = json.loads(take(cfg_len).decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CheckpointError(f"corrupt checkpoint config: {err}") from err
    known = {f.name for f in fields(ModelConfig)}
    unknown = set(cfg_dict) - known
    if unknown:
        raise CheckpointError(f"unknown config keys in checkpoint: {sorted(unknown)}")
    try:
        cfg = ModelConfig(**cfg_dict)
    except (TypeError, ConfigError) as err:
        raise CheckpointError(f"invalid checkpoint config: {err}") from err

    expected = param_shapes(cfg)
    (count,) = struct.unpack("<I", take(4))
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode()
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        if name not in expected:
            raise CheckpointError(f"unexpected parameter {name!r} in checkpoint")
        if shape != expected[name]:
            raise CheckpointError(
                f"parameter {name} has shape {shape}, config requires {expected[name]}"
            )
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(take(4 * size), dtype="<f4").reshape(shape)
        params[name] = arr.astype(np.float64)
    missing = set(expected) - set(params)
    if missing:
        raise CheckpointError(f"checkpoint is missing parameters: {sorted(missing)}")
    if buf.read(1):
        raise CheckpointError(f"trailing data after checkpoint payload: {path}")
    return params, cfg
