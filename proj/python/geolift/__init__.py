"""Recover latent geometry from networks and similarity matrices.

Thin wrapper over the compiled ``_core`` extension. Arrays are NumPy
float64; results with several parts come back as dicts.
"""

from ._core import (
    ConfigError,
    ConvergenceError,
    DataError,
    DimensionError,
    Error,
    KernelAssumptionError,
    UnsupportedVariantError,
    ValidationError,
    embed,
    feature_map,
    geodesic_oracle,
    geodesic_regression,
    isomap,
    kernel_catalog,
    min_connecting_epsilon,
    monotonicity_diagnostic,
    recovery_error,
    run,
    simulate,
)

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "DataError",
    "DimensionError",
    "Error",
    "KernelAssumptionError",
    "UnsupportedVariantError",
    "ValidationError",
    "embed",
    "feature_map",
    "geodesic_oracle",
    "geodesic_regression",
    "isomap",
    "kernel_catalog",
    "min_connecting_epsilon",
    "monotonicity_diagnostic",
    "recovery_error",
    "run",
    "simulate",
]
