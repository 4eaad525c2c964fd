"""Occlusion- and consistency-aware frame and flow interpolation."""
from .consistency import confidence_map, occlusion_map, occlusion_weight_mask
from .core import PipelineConfig, ShapeMismatchError, bilinear_sample, validate
from .interpolate import InterpolationOutput, fill_holes, fuse, intermediate_flows, interpolate
from .warp import SplatResult, backward_warp, softmax_splat

__version__ = "0.1.0"

__all__ = [
    "InterpolationOutput",
    "PipelineConfig",
    "ShapeMismatchError",
    "SplatResult",
    "backward_warp",
    "bilinear_sample",
    "confidence_map",
    "fill_holes",
    "fuse",
    "intermediate_flows",
    "interpolate",
    "occlusion_map",
    "occlusion_weight_mask",
    "softmax_splat",
    "validate",
]
