"""Parametric finite element simulation of geometric flows of curves and surfaces."""

__version__ = "0.1.0"

from .anisotropy import AnisotropyModel, WulffShape, wulff_shape
from .curve import ClosedPolygon, CurveState
from .flow2d import APCSF, CSF, SDF, Flow, Scheme, run_flow
from .flow3d import run_surface_flow
from .linsys import SparseSystem, solve
from .metrics import ErrorTable, convergence_table, manifold_distance_2d, manifold_distance_3d
from .shapes import generate_shape
from .surface import SurfaceState, TriangleSurface

__all__ = [
    "APCSF",
    "AnisotropyModel",
    "CSF",
    "ClosedPolygon",
    "CurveState",
    "ErrorTable",
    "Flow",
    "SDF",
    "Scheme",
    "SparseSystem",
    "SurfaceState",
    "TriangleSurface",
    "WulffShape",
    "convergence_table",
    "generate_shape",
    "manifold_distance_2d",
    "manifold_distance_3d",
    "run_flow",
    "run_surface_flow",
    "solve",
    "wulff_shape",
]
