"""Spectral Galerkin and exponential Euler discretisation of ergodic semilinear SPDEs."""

from .ergodic import (FUNCTIONALS, PHI1, PHI2, PHI3, ErgodicAverageReport, Functional, OrderFit,
                      WeakErrorReport, ergodic_time_average, exact_gaussian_phi1, fit_order,
                      invariant_law_error_spatial, invariant_law_error_temporal, mc_terminal_mean,
                      weak_error_spatial, weak_error_temporal)
from .integrators import EE, LIE, SchemeConfig, StepError, StepsizeError, ee_step, lie_step, simulate
from .models import (DriftBlowUp, ModelProblem, NemytskiiDrift, ValidationError, drift_apply,
                     heat_sin_model, linear_model, validate)
from .noise import RNG_VERSION, NoiseSpec, PathStream, aggregate, check_regularity, increments
from .spectral import (Spectrum, dirichlet_laplacian_spectrum, fractional_power_apply, project,
                       semigroup_apply, to_grid, to_spectral)

__version__ = "0.1.0"

__all__ = [
    "EE", "LIE", "FUNCTIONALS", "PHI1", "PHI2", "PHI3", "RNG_VERSION",
    "DriftBlowUp", "ErgodicAverageReport", "Functional", "ModelProblem", "NemytskiiDrift", "NoiseSpec",
    "OrderFit", "PathStream", "SchemeConfig", "Spectrum", "StepError", "StepsizeError", "ValidationError",
    "WeakErrorReport", "aggregate", "check_regularity", "dirichlet_laplacian_spectrum", "drift_apply",
    "ee_step", "ergodic_time_average", "exact_gaussian_phi1", "fit_order", "fractional_power_apply",
    "heat_sin_model", "increments", "invariant_law_error_spatial", "invariant_law_error_temporal",
    "lie_step", "linear_model", "mc_terminal_mean", "project", "semigroup_apply", "simulate", "to_grid",
    "to_spectral", "validate", "weak_error_spatial", "weak_error_temporal",
]
