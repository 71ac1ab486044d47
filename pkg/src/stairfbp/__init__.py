"""Staircase free boundary problems on convex rings.

Radial oracle, cut-cell finite-difference solver with epsilon continuation,
level-set convexity certification, the conformal multiplicity construction
and the discontinuous obstacle problem.
"""

from .conformal import (MoebiusInvolution, PatchedPhi, RotatedSolutionFamily, build_family,
                        certify_family, moebius_eval, moebius_jacobian, patch_phi)
from .errors import *  # noqa: F401,F403
from .grid import Circle, ConvexRing, Polygon, ScalarField, build_domain, build_field
from .io import RunConfig, parse_config, read_curves, read_field, write_curves, write_field
from .level import (FreeBoundaryCurve, LevelReport, certify_levels, convexity_defect,
                    extract_level, gradient_floor, superlevel_region)
from .nonlinearity import (RegularizationSchedule, ThresholdLadder, heaviside, obstacle_ramp,
                           staircase, staircase_reg)
from .obstacle import ObstacleProblem, audit_lambda_convexity, solve_obstacle
from .radial import (RadialProblem, RadialSolution, eval_radial, eval_radial_deriv,
                     solve_radial, solve_radial_obstacle)
from .ring_fd import continuation_solve, residual_audit, solve_regularized

__version__ = "0.1.0"
