"""Numerical lab for expander-side monotonicity along Ricci flow."""

from ._core import (
    ConfigError,
    Flow,
    NumericalError,
    UnsupportedModel,
    ell_plus,
    entropy_series,
    evolve,
    lambda_bar,
    mu_plus,
    nu_plus,
    run_acceptance,
    run_scenario,
    theta_plus,
    w_plus,
)

__all__ = [
    "ConfigError",
    "Flow",
    "NumericalError",
    "UnsupportedModel",
    "ell_plus",
    "entropy_series",
    "evolve",
    "lambda_bar",
    "mu_plus",
    "nu_plus",
    "run_acceptance",
    "run_scenario",
    "theta_plus",
    "w_plus",
]
