"""Run configuration: a flat `key = value` text file.

Blank lines and lines starting with # are ignored. Every key is
optional and falls back to its default; unknown or duplicate keys and
bad values are reported with the file name, line number, and key.

Keys:
  model       image_size, base_width, depth, patch_size, embed_dim,
              num_heads, ffn_mult, use_vit
  training    epochs, batch_size, learning_rate, seed
  masking     grid_k, p_salt, p_pepper, p_patch, masked_target
  gabor       gabor_preset  -or-  gabor_kernel_size, gabor_sigma,
              gabor_lambda, gabor_gamma
  paths       dataset_root, output_dir
"""

from __future__ import annotations

from dataclasses import dataclass

from .augment import GridSpec, NoiseSpec
from .errors import ConfigError
from .gabor import GaborParams, preset_for
from .net import ModelConfig
from .train import TrainConfig

_BOOLS = {"true": True, "false": False}

_INT_KEYS = {
    "image_size", "base_width", "depth", "patch_size", "embed_dim",
    "num_heads", "ffn_mult", "epochs", "batch_size", "seed", "grid_k",
    "gabor_kernel_size",
}
_FLOAT_KEYS = {
    "learning_rate", "p_salt", "p_pepper", "p_patch",
    "gabor_sigma", "gabor_lambda", "gabor_gamma",
}
_BOOL_KEYS = {"use_vit", "masked_target"}
_STR_KEYS = {"gabor_preset", "dataset_root", "output_dir"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _BOOL_KEYS | _STR_KEYS

_MODEL_KEYS = {
    "image_size", "base_width", "depth", "patch_size", "embed_dim",
    "num_heads", "ffn_mult", "use_vit",
}
_GABOR_EXPLICIT = {"gabor_kernel_size", "gabor_sigma", "gabor_lambda", "gabor_gamma"}


@dataclass
class RunConfig:
    model: ModelConfig
    train: TrainConfig
    gabor: GaborParams | None
    dataset_root: str | None
    output_dir: str

    def require_gabor(self) -> GaborParams:
        if self.gabor is None:
            raise ConfigError(
                "config has no Gabor parameters: set gabor_preset or all of "
                "gabor_kernel_size/gabor_sigma/gabor_lambda/gabor_gamma"
            )
        return self.gabor

    def require_dataset_root(self) -> str:
        if self.dataset_root is None:
            raise ConfigError("config has no dataset_root")
        return self.dataset_root


def _parse_value(path, lineno: int, key: str, raw: str):
    if key in _INT_KEYS:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: key {key}: expected an integer, got {raw!r}") from None
    if key in _FLOAT_KEYS:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: key {key}: expected a number, got {raw!r}") from None
    if key in _BOOL_KEYS:
        v = _BOOLS.get(raw.lower())
        if v is None:
            raise ConfigError(f"{path}:{lineno}: key {key}: expected true or false, got {raw!r}")
        return v
    return raw


def parse_config(path) -> RunConfig:
    """Read and validate a config file into a RunConfig."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from err

    values: dict[str, object] = {}
    where: dict[str, int] = {}
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(
                f"{path}:{lineno}: duplicate key {key!r} (first set on line {where[key]})"
            )
        if not raw:
            raise ConfigError(f"{path}:{lineno}: key {key}: empty value")
        values[key] = _parse_value(path, lineno, key, raw)
        where[key] = lineno

    model_kwargs = {k: values[k] for k in _MODEL_KEYS if k in values}
    model = ModelConfig(**model_kwargs)

    try:
        grid = GridSpec(int(values.get("grid_k", 8)))
        noise = NoiseSpec(
            p_salt=float(values.get("p_salt", 0.05)),
            p_pepper=float(values.get("p_pepper", 0.05)),
            p_patch=float(values.get("p_patch", 0.5)),
        )
        train = TrainConfig(
            epochs=int(values.get("epochs", 10)),
            batch_size=int(values.get("batch_size", 8)),
            learning_rate=float(values.get("learning_rate", 1e-4)),
            grid=grid,
            noise=noise,
            seed=int(values.get("seed", 0)),
            masked_target=bool(values.get("masked_target", False)),
        )
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from None

    explicit = _GABOR_EXPLICIT & set(values)
    if "gabor_preset" in values and explicit:
        raise ConfigError(
            f"{path}:{where['gabor_preset']}: gabor_preset conflicts with "
            f"explicit parameters ({', '.join(sorted(explicit))})"
        )
    gabor: GaborParams | None = None
    if "gabor_preset" in values:
        try:
            gabor = preset_for(str(values["gabor_preset"]))
        except ValueError as err:
            raise ConfigError(f"{path}:{where['gabor_preset']}: {err}") from None
    elif explicit:
        missing = _GABOR_EXPLICIT - explicit
        if missing:
            raise ConfigError(
                f"{path}: incomplete Gabor parameters: missing {', '.join(sorted(missing))}"
            )
        try:
            gabor = GaborParams(
                int(values["gabor_kernel_size"]),
                float(values["gabor_sigma"]),
                float(values["gabor_lambda"]),
                float(values["gabor_gamma"]),
            )
        except ValueError as err:
            raise ConfigError(f"{path}:{where['gabor_kernel_size']}: {err}") from None

    dataset_root = str(values["dataset_root"]) if "dataset_root" in values else None
    output_dir = str(values.get("output_dir", "out"))
    return RunConfig(model, train, gabor, dataset_root, output_dir)
