"""Fractional calculus, fractional Brownian motion, and pathwise stochastic integration."""

__version__ = "0.1.0"

from .fraccalc import (
    DifferintegralSpec,
    GridFunction,
    OperatorKind,
    Side,
    cauchy_repeated_integral,
    fractal_integral,
    fractional_derivative,
    fractional_integral,
    whole_line_fractional_integral,
)
from .gaussianpaths import (
    GridSpec,
    PathGenerator,
    RngSeed,
    SamplePath,
    generate_bm,
    generate_fbm_cholesky,
    generate_fbm_circulant,
    generate_fbm_moving_average,
)

__all__ = [
    "__version__",
    "DifferintegralSpec",
    "GridFunction",
    "OperatorKind",
    "Side",
    "cauchy_repeated_integral",
    "fractal_integral",
    "fractional_derivative",
    "fractional_integral",
    "whole_line_fractional_integral",
    "GridSpec",
    "PathGenerator",
    "RngSeed",
    "SamplePath",
    "generate_bm",
    "generate_fbm_cholesky",
    "generate_fbm_circulant",
    "generate_fbm_moving_average",
]
