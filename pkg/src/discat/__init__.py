"""Robust minimum disparity estimation for categorical data models."""

__version__ = "0.1.0"

from .disparity import pearson_residual, rho, weight, weight_prime
from .estimator import FitConfig, FitResult, fit, loss, loss_gradient, pearson_sample_corr
from .inference import (
    CellTestReport,
    CovarianceReport,
    bh_adjust,
    cell_test,
    confidence_interval,
    covariance_from_fit,
    influence_function,
    plugin_covariance,
)
from .models import PoissonModel, PolychoricModel, RaschModel
from .multivariate import PolyMatrix, FactorFit, cronbach_alpha, factor_fit, nearest_psd, poly_matrix
from .tables import ContingencyTable

__all__ = [
    "ContingencyTable",
    "CellTestReport",
    "CovarianceReport",
    "FactorFit",
    "FitConfig",
    "FitResult",
    "PoissonModel",
    "PolyMatrix",
    "PolychoricModel",
    "RaschModel",
    "bh_adjust",
    "cell_test",
    "confidence_interval",
    "covariance_from_fit",
    "cronbach_alpha",
    "factor_fit",
    "fit",
    "influence_function",
    "loss",
    "loss_gradient",
    "nearest_psd",
    "pearson_residual",
    "pearson_sample_corr",
    "plugin_covariance",
    "poly_matrix",
    "rho",
    "weight",
    "weight_prime",
]
