"""Kriging and spline emulators for expensive conditional expectations."""

from .kriging import (
    ConvergenceWarning,
    KernelSpec,
    KrigingFit,
    TrainingSet,
    fit_hyperparams,
    fit_kriging,
    fit_sk,
    fit_uk,
    log_likelihood,
    s_ave,
)
from .serialize import load, save
from .splines import SplineFit, fit_smoothing_spline_1d, fit_tps, predict

__all__ = [
    "ConvergenceWarning",
    "KernelSpec",
    "KrigingFit",
    "SplineFit",
    "TrainingSet",
    "fit_hyperparams",
    "fit_kriging",
    "fit_sk",
    "fit_smoothing_spline_1d",
    "fit_tps",
    "fit_uk",
    "load",
    "log_likelihood",
    "predict",
    "s_ave",
    "save",
]
