"""Residual coefficient of variation tests for exponential versus Pareto tails."""

__version__ = "0.1.0"

from .asymptotics import (  # noqa: E402
    ChiSquareApprox,
    EigenSpectrum,
    approx_pvalue,
    build_sigma,
    eigenvalues,
    moment_match,
    sample_asymptotic_T,
)
from .distributions import Alternative, GpdParams, RandomSource, StudentParams  # noqa: E402
from .empirics import (  # noqa: E402
    Sample,
    cv_curve,
    dyadic_thresholds,
    residual_cv,
    statistic_cv,
    statistic_mw,
    statistic_su,
    statistic_T_m,
)
from .gpdfit import GpdFit, fit_gpd_ml  # noqa: E402

__all__ = [
    "Alternative", "ChiSquareApprox", "EigenSpectrum", "GpdFit", "GpdParams", "RandomSource",
    "Sample", "StudentParams", "approx_pvalue", "build_sigma", "cv_curve", "dyadic_thresholds",
    "eigenvalues", "fit_gpd_ml", "moment_match", "residual_cv", "sample_asymptotic_T",
    "statistic_T_m", "statistic_cv", "statistic_mw", "statistic_su",
]
