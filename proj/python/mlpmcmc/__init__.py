"""Multilevel particle MCMC for partially observed stochastic Volterra equations."""

from ._mlpmcmc import (
    Error,
    choose_levels,
    default_params,
    delta_particle_filter,
    kernel,
    lagged_abs_correlation,
    log_returns,
    mlpmcmc,
    particle_filter,
    pmcmc,
    return_stats,
    run_command,
    simulate,
    volatility_path,
)

__all__ = [
    "Error",
    "choose_levels",
    "default_params",
    "delta_particle_filter",
    "kernel",
    "lagged_abs_correlation",
    "log_returns",
    "mlpmcmc",
    "particle_filter",
    "pmcmc",
    "return_stats",
    "run_command",
    "simulate",
    "volatility_path",
]
