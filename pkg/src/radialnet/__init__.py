"""Radial power-basis models with learnable exponents."""

from .models import ModelKind, ParamLayout, param_count, forward, spatial_gradient, laplacian

__all__ = [
    "ModelKind",
    "ParamLayout",
    "param_count",
    "forward",
    "spatial_gradient",
    "laplacian",
]

__version__ = "0.1.0"
