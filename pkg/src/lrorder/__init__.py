"""Estimation and inference for two samples under a likelihood ratio order."""

from .errors import (
    DegenerateOrderError,
    DomainError,
    InvalidInputError,
    LROError,
    QuantileTableError,
    UndefinedNuisanceError,
    UnsupportedPointError,
)
from .estimators import LroFit, TwoSample, fit_lro, fit_theta, odc_hull, pool, theta_via_odc
from .geometry import PointSet, gcm, lcm, left_derivative
from .inference import IntervalEstimate, interval, lrt_ci, split_ci, split_fit
from .isotonic import IsotonicFit, WeightedSeries, pava, pava_bounded
from .quantiles import chernoff_quantiles, load_table, lrt_quantiles

__version__ = "0.1.0"

__all__ = [
    "DegenerateOrderError", "DomainError", "InvalidInputError", "LROError",
    "QuantileTableError", "UndefinedNuisanceError", "UnsupportedPointError",
    "LroFit", "TwoSample", "fit_lro", "fit_theta", "odc_hull", "pool", "theta_via_odc",
    "PointSet", "gcm", "lcm", "left_derivative",
    "IntervalEstimate", "interval", "lrt_ci", "split_ci", "split_fit",
    "IsotonicFit", "WeightedSeries", "pava", "pava_bounded",
    "chernoff_quantiles", "load_table", "lrt_quantiles",
]
