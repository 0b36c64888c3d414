"""Minimal Lipschitz extensions of 1-fields."""

from .field import FieldError, JetSample, OneField, detect_affine, dump_field, eval_jet, load_field, save_field
from .gamma import gamma1, gamma1_argmax, gamma1_pair_bruteforce, gamma_report, lip_df, pair_stats
from .kirszbraun import LipschitzMapData, extend_map, lift_map, lipschitz_constant, one_point_oracle
from .supinf import (
    ExtensionResult,
    ExtremalSolver,
    SolverError,
    certify_mle_point,
    extend_field,
    lambda_constraints,
    project_lambda,
    psi,
    u_extremal,
)
from .verification import amle_check, biponctual_mle, e1_fixture, two_circles_fixture
from .wells import WellsExtension, enumerate_cells, wells_value

__version__ = "0.1.0"
