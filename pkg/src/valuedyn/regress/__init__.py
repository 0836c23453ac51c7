"""From-scratch regressors for predicting the BCM threshold."""

from .kernels import Kernel, kernel_eval, kernel_matrix
from .model import (
    FAMILIES,
    CVResult,
    FittedModel,
    RegressorSpec,
    Standardizer,
    cross_validate,
    fit,
    fit_dataset,
    fit_elasticnet,
    fit_gp,
    fit_ridge,
    fit_svr,
    load_model,
    mse,
    parse_family,
    predict,
    predict_raw,
    save_model,
)

__all__ = [
    "FAMILIES", "CVResult", "FittedModel", "Kernel", "RegressorSpec", "Standardizer",
    "cross_validate", "fit", "fit_dataset", "fit_elasticnet", "fit_gp", "fit_ridge",
    "fit_svr", "kernel_eval", "kernel_matrix", "load_model", "mse", "parse_family",
    "predict", "predict_raw", "save_model",
]
