"""Sampling and certification of k-medial axes of closed sets in R^n."""

__version__ = "0.1.0"

from medax.geometry import affine_rank, angle_at, is_generic
from medax.configuration import (
    Configuration,
    Frame,
    build_frame,
    config_distance,
    f_of_w,
    in_cone,
    separation_check,
    separation_constant,
)

__all__ = [
    "Configuration",
    "Frame",
    "affine_rank",
    "angle_at",
    "build_frame",
    "config_distance",
    "f_of_w",
    "in_cone",
    "is_generic",
    "separation_check",
    "separation_constant",
]
