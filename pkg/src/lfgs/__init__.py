"""Leapfrog geodesics on the Stiefel manifold St(n, p) with the canonical metric."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .errors import IllPosed, LfgsError, NotConverged, NotOnManifold, RankDeficient, SingularDiagonal, TooFarApart
from .geodesics import (DELTA_G, LeapfrogTrace, PiecewisePath, ShootingResult, geodesic_midpoint, initialize_path,
                        leapfrog_run, leapfrog_sweep, log_map_shooting, path_length, riemannian_distance)
from .linalg import SymEigResult, matrix_exp, orth_complement, polar_orthogonal, sym_eig, vec_perm
from .stiefel import (StiefelPoint, TangentVector, canonical_inner, exp_map, make_point, random_point,
                      random_tangent, tangent_from_blocks)

__all__ = [
    "BACKEND", "DELTA_G", "IllPosed", "LeapfrogTrace", "LfgsError", "NotConverged", "NotOnManifold",
    "PiecewisePath", "RankDeficient", "ShootingResult", "SingularDiagonal", "StiefelPoint", "SymEigResult",
    "TangentVector", "TooFarApart", "canonical_inner", "exp_map", "geodesic_midpoint", "initialize_path",
    "leapfrog_run", "leapfrog_sweep", "log_map_shooting", "make_point", "matrix_exp", "orth_complement",
    "path_length", "polar_orthogonal", "random_point", "random_tangent", "riemannian_distance", "sym_eig",
    "tangent_from_blocks", "vec_perm",
]
