"""Finite-temperature Nelson stochastic mechanics.

Thin wrapper over the compiled core: thermal-oscillator closed forms,
grouped stochastic ensembles, estimators, and field-equation residual
checks. See the project README for the CLI and file formats.
"""

from ._core import (  # noqa: F401
    ChiSquareResult,
    DriftValues,
    Ensemble,
    EquilibriumSolution,
    Histogram,
    MomentEstimates,
    PhysicalParams,
    StationaryCovariance,
    ThermalPoint,
    UncertaintyReport,
    __version__,
    equilibrium_residual_norms,
    gaussian_chi_square_test,
    inverse_transform,
    marginal_histogram,
    moment_estimates,
    nondimensionalize,
    partition_function,
    simulate_ensemble,
    simulate_transformed_ensemble,
    thermal_occupation,
    transform_coordinates,
    uncertainty_estimate,
)
