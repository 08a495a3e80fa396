"""Kernel smoothing with scalar, diagonal and full bandwidth matrices."""

from ._core import (
    BandwidthMatrix,
    KsmoothError,
    __version__,
    conditional_density,
    estimate_mise,
    fit_rate,
    generate,
    kde,
    lscv_regression,
    nw_regression,
    run,
    select_bandwidth,
    true_regression,
)

__all__ = [
    "BandwidthMatrix",
    "KsmoothError",
    "__version__",
    "conditional_density",
    "estimate_mise",
    "fit_rate",
    "generate",
    "kde",
    "lscv_regression",
    "nw_regression",
    "run",
    "select_bandwidth",
    "true_regression",
]
