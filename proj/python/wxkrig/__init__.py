"""Spatial interpolation and precipitation index toolkit."""

from wxkrig._core import (
    Panel,
    Station,
    ToolkitError,
    boxcox,
    boxcox_inverse,
    cdd,
    covariance,
    cv_daily,
    cv_index,
    distance,
    interpolate_point,
    kfold,
    kurtosis,
    load_dataset,
    mae,
    mfp,
    moments,
    rmse,
    skewness,
    tgk_back_transform,
    validate,
)

__all__ = [
    "Panel",
    "Station",
    "ToolkitError",
    "boxcox",
    "boxcox_inverse",
    "cdd",
    "covariance",
    "cv_daily",
    "cv_index",
    "distance",
    "interpolate_point",
    "kfold",
    "kurtosis",
    "load_dataset",
    "mae",
    "mfp",
    "moments",
    "rmse",
    "skewness",
    "tgk_back_transform",
    "validate",
]
