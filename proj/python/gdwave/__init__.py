"""Blow-up and lifespan experiments for damped wave equations on weighted graphs.

Configs are passed as text in the same ``key = value`` format the ``gdw``
command line reads; ``default_config()`` lists every key.
"""

from ._core import (
    ConfigError,
    DomainError,
    Error,
    Graph,
    InsufficientDataError,
    NoPredictionError,
    build_lattice,
    config_hash,
    default_beta,
    default_config,
    distances,
    estimate_lifespan,
    fit_scaling,
    fujita,
    gamma,
    lifespan_sweep,
    normalize_config,
    phi,
    phi_star,
    predicted_lifespan_model,
    read_graph,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "Error",
    "Graph",
    "InsufficientDataError",
    "NoPredictionError",
    "build_lattice",
    "config_hash",
    "default_beta",
    "default_config",
    "distances",
    "estimate_lifespan",
    "fit_scaling",
    "fujita",
    "gamma",
    "lifespan_sweep",
    "normalize_config",
    "phi",
    "phi_star",
    "predicted_lifespan_model",
    "read_graph",
]
