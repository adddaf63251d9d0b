"""Reconstruction-based surface defect detection with Gabor post-processing.

Train a blurring U-Net-ViT on normal images corrupted by salt-and-pepper
grid masking, then score test images by filtering the reconstruction
with an 8-orientation Gabor bank and taking the peak of the averaged
response map. Higher score = more defective; evaluation is by ROC/AUC.
"""

from ._kernels import get_backend
from .augment import GridSpec, NoiseSpec, TrainingPair, make_training_pair, partition_grid, sp_mask
from .errors import (
    CheckpointError,
    ConfigError,
    DatasetError,
    EmptyImageError,
    GaborDefectError,
    ImageError,
    ShapeError,
    TrainingError,
    UnreadableImageError,
    UnsupportedImageError,
)
from .evaluation import (
    DatasetSplit,
    RocResult,
    ScoreRecord,
    SweepRanges,
    default_ranges,
    evaluate,
    load_dataset,
    roc_auc,
    score_image,
    sweep,
)
from .gabor import (
    GaborBank,
    GaborParams,
    PRESETS,
    ResponseStack,
    apply_bank,
    average_response,
    build_bank,
    dfscore,
    gabor_kernel,
    orientation,
    preset_for,
)
from .imgcore import (
    Image,
    Kernel,
    bilinear_resize,
    conv2d,
    ensure_rgb,
    gaussian_blur,
    gaussian_kernel,
    load_image,
    save_image,
    to_grayscale,
)
from .net import (
    ForwardTrace,
    ModelConfig,
    backward,
    forward,
    init_params,
    load_checkpoint,
    param_shapes,
    save_checkpoint,
)
from .synth import generate_dataset
from .train import Adam, LossReport, TrainConfig, fit, gaussian_loss, l1_loss, total_loss

__version__ = "0.1.0"
