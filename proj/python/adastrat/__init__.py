"""Adaptive stratified sampling for Monte Carlo over Gaussian vectors."""

from adastrat._core import (
    ConfigError,
    DegenerateError,
    Payoff,
    RandomStream,
    StrataGrid,
    apply_drift,
    asian_payoff,
    barrier_payoff,
    basket_payoff,
    build_equiprobable_grid,
    draws_from_allocation,
    fixed_I_variance,
    guess_direction_asian,
    heston_payoff,
    lhs_estimate,
    optimal_allocation,
    optimal_drift,
    orthonormalize,
    regression_direction,
    rotation_from_direction,
    run_adapt,
    run_experiment_text,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
    truncated_normal_moments,
)

__all__ = [
    "ConfigError",
    "DegenerateError",
    "Payoff",
    "RandomStream",
    "StrataGrid",
    "apply_drift",
    "asian_payoff",
    "barrier_payoff",
    "basket_payoff",
    "build_equiprobable_grid",
    "draws_from_allocation",
    "fixed_I_variance",
    "guess_direction_asian",
    "heston_payoff",
    "lhs_estimate",
    "optimal_allocation",
    "optimal_drift",
    "orthonormalize",
    "regression_direction",
    "rotation_from_direction",
    "run_adapt",
    "run_experiment_text",
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_quantile",
    "truncated_normal_moments",
]

__version__ = "0.1.0"
