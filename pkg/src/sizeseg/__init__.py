"""Desk-scale weakly-supervised semantic segmentation via size targets.

Training images carry only approximate per-class area fractions (and
optionally a few clicked pixels); the engine fits small segmentation
models against a KL size-target loss regularized by a sparse pairwise
affinity term, alongside the barrier and balancing baselines it is
compared with.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .affinity import AffinityConfig, AffinityGraph, build_affinity
from .fields import PredictionField, SeedSet, TagSet, softmax
from .metrics import ConfusionMatrix, REHistogram, dice, miou, mre, relative_error
from .net import ModelConfig, ModelParams, forward, backward, init_params
from .simplex import (
    UNDEFINED,
    CategoricalDist,
    CorruptionConfig,
    average_prediction,
    corrupt_sizes,
    kl_forward,
    kl_reverse,
    mre_for_sigma,
    sigma_for_mre,
    uniform_over,
)
from .synthdata import (
    GenConfig,
    SampleRecord,
    ScribbleConfig,
    dataset_mean_sizes,
    generate,
    generate_scribbles,
    load_dataset,
    save_dataset,
    sizes_from_mask,
)
from .trainer import SupervisionMode, TrainConfig, TrainReport, evaluate, lr_at, train

__version__ = "0.1.0"

__all__ = [
    "AffinityConfig", "AffinityGraph", "build_affinity",
    "CategoricalDist", "ConfusionMatrix", "CorruptionConfig",
    "GenConfig", "KERNEL_BACKEND", "ModelConfig", "ModelParams",
    "PredictionField", "REHistogram", "SampleRecord", "ScribbleConfig",
    "SeedSet", "SupervisionMode", "TagSet", "TrainConfig", "TrainReport",
    "UNDEFINED", "average_prediction", "backward", "corrupt_sizes",
    "dataset_mean_sizes", "dice", "evaluate", "forward", "generate",
    "generate_scribbles", "init_params", "kl_forward", "kl_reverse",
    "load_dataset", "lr_at", "miou", "mre", "mre_for_sigma",
    "relative_error", "save_dataset", "sigma_for_mre", "sizes_from_mask",
    "softmax", "train", "uniform_over",
]
