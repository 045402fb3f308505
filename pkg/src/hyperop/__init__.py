"""Bounded analytic hyper-operators by continued differintegrals.

Level ``n`` of the tower is ``F_n(z) = F_(n-1)^z(1)`` for a base
``1 < alpha < e^(1/e)``: ``F_0(z) = alpha z``, ``F_1(z) = alpha^z``,
tetration, pentation and so on. Each level is computed as the continued
differintegral of the exponential generating series of its integer orbit and
checked against a Koenigs-linearization oracle.
"""

from .errors import *  # noqa: F401,F403
from .errors import __all__ as _errors_all
from .kernels import BACKEND
from .numerics import (
    PrecisionPolicy,
    RayContour,
    contour_derivative,
    euler_gamma_continuation,
    gamma,
    loggamma,
    recip_gamma,
    stirling_estimate,
)
from .differintegral import (
    EvalPolicy,
    MellinTransform,
    SingularTerm,
    ThetaSeries,
    build_transform,
    differintegral_eval,
    matrix_fractional_power,
    near_integer_eval,
    rmt_interpolation_check,
    theta_eval,
)
from .schroder import SchroderModel, find_fixed_point, fractional_iterate_oracle, koenigs, koenigs_inverse
from .tower import (
    LevelContext,
    Tower,
    TowerConfig,
    build_level,
    derivative_nonvanishing,
    eval,
    level0,
    level1,
    verify_functional_equation,
    verify_monotone_real,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "PrecisionPolicy",
    "RayContour",
    "contour_derivative",
    "euler_gamma_continuation",
    "gamma",
    "loggamma",
    "recip_gamma",
    "stirling_estimate",
    "EvalPolicy",
    "MellinTransform",
    "SingularTerm",
    "ThetaSeries",
    "build_transform",
    "differintegral_eval",
    "matrix_fractional_power",
    "near_integer_eval",
    "rmt_interpolation_check",
    "theta_eval",
    "SchroderModel",
    "find_fixed_point",
    "fractional_iterate_oracle",
    "koenigs",
    "koenigs_inverse",
    "LevelContext",
    "Tower",
    "TowerConfig",
    "build_level",
    "derivative_nonvanishing",
    "eval",
    "level0",
    "level1",
    "verify_functional_equation",
    "verify_monotone_real",
    *_errors_all,
]
