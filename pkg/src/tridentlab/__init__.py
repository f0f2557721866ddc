"""Numerical laboratory for singly periodic translating solitons on strips."""

from .grid import (
    Grid, ScalarField, StripSpec, build_grid, diff, field_from_function,
    load_field_bin, load_field_csv, save_field_bin, save_field_csv,
)
from .operators import (
    AreaEstimate, FluxBalance, FluxField, flux_balance, flux_field,
    gauss_sign_field, linearize, residual, weighted_area,
)
from .profiles import (
    GrimReaper, SupersolutionReport, grim_reaper_eval, one_d_profile,
    supersolution_check,
)
from .solver import (
    DEFAULT_CAPS, BoundaryData, LinearSolveFailure, SolveReport, StageTrace,
    alpha_boundary, cap_continuation, constant_boundary,
    reaper_trace_boundary, solve_bvp, trident_boundary,
)

__version__ = "0.1.0"
