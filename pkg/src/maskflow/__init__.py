"""maskflow: training-free temporal mask tracking over dense feature maps."""

__version__ = "0.1.0"

from .engine import (
    MemoryQueue,
    SpatialWindowMask,
    TrackerConfig,
    WindowedAffinity,
    argmax_labels,
    build_spatial_mask,
    compute_windowed_affinity,
    downsample_mask,
    normalize_features,
    propagate,
    track_video,
    track_video_iter,
    update_memory,
    upsample_soft_mask,
)
from .errors import ConfigError, DimensionError, FormatError, MaskflowError
from .metrics import (
    EvalReport,
    FrameScore,
    aggregate,
    boundary_f_score,
    jaccard_per_class,
    pixel_accuracy,
    pixel_f_score,
    score_frame,
)
from .analysis import PcaBasis, fit_pca, render_pca_rgb, temporal_consistency_score
from .synth import SynthConfig, gen_sequence
from .tensorstore import (
    DatasetManifest,
    load_manifest,
    read_feature_map,
    read_mask,
    save_manifest,
    write_feature_map,
    write_mask,
)

__all__ = [
    "ConfigError",
    "DatasetManifest",
    "DimensionError",
    "EvalReport",
    "FormatError",
    "FrameScore",
    "MaskflowError",
    "MemoryQueue",
    "PcaBasis",
    "SpatialWindowMask",
    "SynthConfig",
    "TrackerConfig",
    "WindowedAffinity",
    "aggregate",
    "argmax_labels",
    "boundary_f_score",
    "build_spatial_mask",
    "compute_windowed_affinity",
    "downsample_mask",
    "fit_pca",
    "gen_sequence",
    "jaccard_per_class",
    "load_manifest",
    "normalize_features",
    "pixel_accuracy",
    "pixel_f_score",
    "propagate",
    "read_feature_map",
    "read_mask",
    "render_pca_rgb",
    "save_manifest",
    "score_frame",
    "temporal_consistency_score",
    "track_video",
    "track_video_iter",
    "update_memory",
    "upsample_soft_mask",
    "write_feature_map",
    "write_mask",
]
