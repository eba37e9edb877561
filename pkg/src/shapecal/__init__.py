"""Shape-constrained radial distortion calibration.

Fits polynomial, division, and rational lens distortion models to point
correspondences while certifying a requested curve shape (barrel,
pincushion, or a strictly positive denominator) over the field of view.
Shape requirements become polynomial nonnegativity constraints on a finite
interval, expressed through PSD Gram-matrix certificates and solved with the
bundled small-scale semidefinite programming solver; constraints that are
polynomial rather than linear in the unknowns go through a moment relaxation
hierarchy with minimizer extraction.
"""

from . import calib, certs, distortion, pipeline, poly, relax, sdp
from .calib import (CalibConfig, CalibResult, CostData, assemble_cost,
                    solve_barrel, solve_pincushion, solve_unconstrained,
                    solve_zero_crossing)
from .distortion import DistortionModel, PoleError, ShapeReport, shape_check

__all__ = [
    "poly", "certs", "sdp", "relax", "distortion", "calib", "pipeline",
    "CalibConfig", "CalibResult", "CostData", "assemble_cost",
    "solve_barrel", "solve_pincushion", "solve_unconstrained",
    "solve_zero_crossing",
    "DistortionModel", "PoleError", "ShapeReport", "shape_check",
]

__version__ = "0.1.0"
