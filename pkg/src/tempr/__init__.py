"""Temporal progressive attention for early action prediction.

Progressive fine-to-coarse temporal scales over an observed video prefix,
per-scale cross-attention bottleneck towers, and adaptive confidence/agreement
aggregation of the per-scale predictions, on a self-contained float64
reverse-mode autodiff core.
"""

from .aggregate import BetaParam, PredictionSet, adaptive, dsc, eap_label, eicw, em, variant
from .dataio import (
    DatasetManifest,
    ObservedPrefix,
    VideoClip,
    VideoDataset,
    clip_to_ratio,
    generate_synthetic,
    read_dataset,
    write_dataset,
)
from .encoder import Encoder3D, EncoderConfig, adaptive_avg_pool
from .errors import ConfigError, FormatError
from .estimator import TemPrClassifier
from .model import ModelConfig, TemPrModel
from .scales import ScaleSet, build_scales, gather_inputs, sample_frames
from .tower import TowerConfig, fourier_pe
from .trainer import MetricsRecord, RunConfig, ablate, evaluate, report, train

__version__ = "0.1.0"

__all__ = [
    "BetaParam", "ConfigError", "DatasetManifest", "Encoder3D", "EncoderConfig", "FormatError",
    "MetricsRecord", "ModelConfig", "ObservedPrefix", "PredictionSet", "RunConfig", "ScaleSet",
    "TemPrClassifier", "TemPrModel", "TowerConfig", "VideoClip", "VideoDataset", "ablate",
    "adaptive", "adaptive_avg_pool", "build_scales", "clip_to_ratio", "dsc", "eap_label",
    "eicw", "em", "evaluate", "fourier_pe", "gather_inputs", "generate_synthetic",
    "read_dataset", "report", "sample_frames", "train", "variant", "write_dataset",
]
