"""Street-view panorama depth to satellite-aligned top-down rasters."""
from .bev import BaselineMode, BevGrid, BevGridSpec, Reduction, ground_plane_project, rasterize, translate
from .evaluation import ConfusionMatrix, accumulate, accuracy, miou, per_class_table
from .fusion import concat, fuse_aligned, global_average_pool, pointwise_linear, warp
from .guidance import (
    AlphaGrid,
    FootprintMask,
    alpha_from_ratio,
    alpha_lookup,
    block_ratio_grid,
    build_alpha_grid,
    contains,
)
from .panorama import (
    AngleGrid,
    PanoramaDepth,
    PointCloud,
    camera_to_ground_plane,
    compute_angle_grid,
    depth_to_points,
)
from .reprojection import Mode, ReprojectionConfig, offset_direction, offset_magnitude, reproject

__version__ = "0.1.0"
