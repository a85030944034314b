"""Goodness of fit with estimated parameters."""

from .families import (
    EXPONENTIAL,
    NORMAL,
    ParametricFamily,
    family_from_description,
    get_family,
    load_family,
    register,
)
from .process import (
    CovarianceGrid,
    build_covariance_grid,
    covariance,
    h_function,
    sigma_matrix,
    simulate_sup_abs,
    sup_abs_draws,
)
from .pvalue import bootstrap_pvalue, dbr_pvalue, gof_statistic

__all__ = [
    "ParametricFamily",
    "NORMAL",
    "EXPONENTIAL",
    "get_family",
    "register",
    "family_from_description",
    "load_family",
    "CovarianceGrid",
    "h_function",
    "sigma_matrix",
    "covariance",
    "build_covariance_grid",
    "simulate_sup_abs",
    "sup_abs_draws",
    "gof_statistic",
    "dbr_pvalue",
    "bootstrap_pvalue",
]
