"""uavbench: anti-UAV tracking/detection benchmark harness with
confidence-gated tracker/detector fusion."""

from .geometry import Box, iou, center_error, normalized_center_error
from .plugins import ScoredBox
from .fusion import FusionConfig, FusionTrace, fuse_sequence, fuse_step

__version__ = "0.1.0"

__all__ = [
    "Box",
    "iou",
    "center_error",
    "normalized_center_error",
    "ScoredBox",
    "FusionConfig",
    "FusionTrace",
    "fuse_sequence",
    "fuse_step",
    "__version__",
]
