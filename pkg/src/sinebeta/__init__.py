"""Stochastic simulation and rare-event estimation for the Sine_beta counting function."""

__version__ = "0.1.0"

from .specialfn import (
    DomainError,
    brownian_sup_lower_bound,
    elliptic_e,
    elliptic_k,
    k_inverse,
    lambert_w_lower,
    normal_cdf,
)
from .noise import NoiseStream
from .sde import (
    ConfigError,
    DiffusionKind,
    DiffusionSpec,
    PathEvent,
    PathOutcome,
    SimConfig,
    XPathRecord,
    alpha_constant,
    alpha_decaying,
    counting_horizon,
    couple_pair,
    default_step,
    girsanov_log_weight,
    log_likelihood_ratio,
    simulate_alpha,
    simulate_x,
    x_constant,
    y_family,
)
from .estimators import (
    Estimate,
    Particle,
    SplittingConfig,
    direct_overcrowding,
    estimate_hitting_cdf,
    estimate_overcrowding,
    mgf_check,
    recursion_check,
    sample_counting,
    splitting_level_profile,
    window_probability,
)
from .bounds import (
    BoundEnvelope,
    BoundSide,
    RecursionState,
    envelope_log_bounds,
    fit_envelope_constant,
    lower_recursion,
    tau_log_bound,
    trivial_log_upper,
    upper_recursion,
)

__all__ = [
    "__version__",
    "BoundEnvelope",
    "BoundSide",
    "ConfigError",
    "DiffusionKind",
    "DiffusionSpec",
    "DomainError",
    "Estimate",
    "NoiseStream",
    "Particle",
    "PathEvent",
    "PathOutcome",
    "RecursionState",
    "SimConfig",
    "SplittingConfig",
    "XPathRecord",
    "alpha_constant",
    "alpha_decaying",
    "brownian_sup_lower_bound",
    "counting_horizon",
    "couple_pair",
    "default_step",
    "direct_overcrowding",
    "elliptic_e",
    "elliptic_k",
    "envelope_log_bounds",
    "estimate_hitting_cdf",
    "estimate_overcrowding",
    "fit_envelope_constant",
    "girsanov_log_weight",
    "k_inverse",
    "lambert_w_lower",
    "log_likelihood_ratio",
    "lower_recursion",
    "mgf_check",
    "normal_cdf",
    "recursion_check",
    "sample_counting",
    "simulate_alpha",
    "simulate_x",
    "splitting_level_profile",
    "tau_log_bound",
    "trivial_log_upper",
    "upper_recursion",
    "window_probability",
    "x_constant",
    "y_family",
]
