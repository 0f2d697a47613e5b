"""Warm-start, densification-free dynamic Gaussian splatting on CPU."""

__version__ = "0.1.0"

from .gaussians import FrameGradients, GaussianFrame
from .geometry import Camera, CameraIntrinsics, CameraPose
from .render import rasterize, rasterize_backward, rasterize_with_depth

__all__ = [
    "Camera", "CameraIntrinsics", "CameraPose",
    "FrameGradients", "GaussianFrame",
    "rasterize", "rasterize_backward", "rasterize_with_depth",
    "__version__",
]
