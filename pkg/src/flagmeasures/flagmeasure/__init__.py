"""Flag measures of polytopes, flag functions and the transform ``T_j``."""

from .functions import (
    FlagFunction,
    TripleFunction,
    cap_indicator,
    constant,
    constant_triple,
    coordinate,
    det_squared_to,
    lift,
    of_direction,
    spatial,
)
from .measures import (
    FlagAtom,
    FlagMeasure,
    area_measure_sphere,
    flag_area_measure,
    flag_curvature_measure,
    integrate,
    tau,
    theta_polytope,
    theta_samples,
)
from .transform import psi_direct, psi_integrate, grassmann_det_moment, transform_T, transform_constant_check
from .valuation import MODES, Valuation, evaluate_valuation
from .identities import alt_representation, alt_representation_lhs, alt_representation_rhs, area_marginal, psi_link
