"""Optimal polynomial meshes on convex bodies via a Dubiner-type metric.

The package builds meshes whose points see every polynomial of bounded total
degree: normalize the body between the unit ball and B(0, d), construct a
greedy maximal separated set in the boundary-adapted metric, then certify
empirically that the sup norm over the body is at most twice the max over
the mesh. See README.md for the pipeline and the CLI.
"""

__version__ = "0.1.0"

from .dubiner import (DirectionSet, MetricContext, RhoBallSample, affine_transfer_bound,
                      doubling_ratio, doubling_scan, estimate_tau_dir, rho_ball_membership,
                      rho_batch, rho_brute_force, rho_directional, rho_lower, rho_refined,
                      rho_refined_with_direction, strip_shrink_check)
from .errors import (DegreeBudgetError, FingerprintMismatchError, FlatnessError, InputError,
                     MeshQualityError, NormalizationError, PolymeshError, RangeViolationError,
                     SeparationError, UnboundedBodyError)
from .geometry import (AffineMap, Ball, ConvexBody, Ellipsoid, HPolytope, NormalizedBody,
                       VPolytope, contains, john_normalize, ray_extent, sample_candidates,
                       support_point, support_value)
from .mesh import (Mesh, MeshSpec, build_mesh, covering_audit, default_c_mesh,
                   default_pool_size, mesh_cardinality_scan, separation_audit)
from .poly import (Affine, Cheb, DensePoly, PolyExpr, Power, Product, Scale, Shift, Sum,
                   bernstein_segment_bound, cheb_eval, compose_affine, constant_poly,
                   fast_decreasing_poly, fit_decay_rate, poly_from_dict, random_poly,
                   resolving_poly, sup_norm_estimate)
from .verify import BernsteinReport, NormingReport, bernstein_ratio, certify, norming_constant

__all__ = [name for name in dir() if not name.startswith("_")]
