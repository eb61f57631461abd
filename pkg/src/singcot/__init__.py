"""Singular cotangent models of integrable systems near non-degenerate singular levels."""

from .cotangent_model import MomentumSystem, build_hyperbolic_loop, build_local_system, glue, verify_commutation
from .geometry import Atlas, Chart, PointRef, TransitionMap, validate_atlas
from .normal_forms import LocalModel, classify_model, enumerate_branches, tangent_plane_limit
from .sphere import build_glued_sphere_system, singular_scan

__version__ = "0.1.0"

__all__ = [
    "Atlas",
    "Chart",
    "LocalModel",
    "MomentumSystem",
    "PointRef",
    "TransitionMap",
    "build_glued_sphere_system",
    "build_hyperbolic_loop",
    "build_local_system",
    "classify_model",
    "enumerate_branches",
    "glue",
    "singular_scan",
    "tangent_plane_limit",
    "validate_atlas",
    "verify_commutation",
]
