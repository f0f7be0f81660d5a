"""Pump-failure Gibbs sampler: drift, small set and minorization data."""
from .model import (
    DEFAULT_LAMBDA_GRID,
    LambdaScan,
    MinorizingMeasure,
    PumpModel,
    PumpReport,
    SmallSet,
    SmallSetResult,
    conditional_moments,
    find_small_set,
    gibbs_step,
    load_pump_data,
    minorization_epsilon,
    optimize_lambda,
    pv,
    reproduce_table,
    scan_lambda,
    small_set_result,
)
from .specfun import gamma_sampler, ln_gamma, regularized_gamma_P, regularized_gamma_Q
