"""matlight: joint material and incident-light estimation from posed images."""

__version__ = "0.1.0"

from .brdf import BrdfParams, ShadingVectors, eval_brdf, fresnel_schlick, geometry_ggx, ndf_sg
from .fields import (
    BrdfField,
    DirectionalLightField,
    FieldConfig,
    IncidentLightField,
    PixelEnvMap,
    positional_encoding,
)
from .hemisphere import DirectionSet, TangentFrame, build_tangent_frame, fibonacci_hemisphere, random_hemisphere
from .losses import LossWeights, PixelBatch, image_l1, lambertian_loss, smoothness_loss, total_loss
from .renderer import SurfacePoint, TonemapParams, render_batch, render_point, render_view, tonemap

__all__ = [
    "__version__",
    "BrdfParams", "ShadingVectors", "eval_brdf", "fresnel_schlick", "geometry_ggx", "ndf_sg",
    "BrdfField", "DirectionalLightField", "FieldConfig", "IncidentLightField", "PixelEnvMap",
    "positional_encoding",
    "DirectionSet", "TangentFrame", "build_tangent_frame", "fibonacci_hemisphere", "random_hemisphere",
    "LossWeights", "PixelBatch", "image_l1", "lambertian_loss", "smoothness_loss", "total_loss",
    "SurfacePoint", "TonemapParams", "render_batch", "render_point", "render_view", "tonemap",
]
