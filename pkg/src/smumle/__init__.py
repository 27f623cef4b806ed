"""Nonparametric maximum likelihood for scale mixtures of uniform densities on (0, inf)^d."""

from .geometry import Grid, Rect, SignedVertex, g_volume, grid_join, make_grid, vertex_signs
from .metrics import distance, hellinger, hellinger_vs_exp_truth, l1_distance, mc_distance
from .smu import (
    GriddedDensity,
    MixingMeasure,
    SmuDensity,
    TruthModel,
    eval_cdf,
    eval_density,
    is_smu,
    sample,
    weights_from_density,
)
from .solver import FenchelCertificate, FitResult, certify, fit, grenander_1d

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "Rect",
    "SignedVertex",
    "g_volume",
    "grid_join",
    "make_grid",
    "vertex_signs",
    "GriddedDensity",
    "MixingMeasure",
    "SmuDensity",
    "TruthModel",
    "eval_cdf",
    "eval_density",
    "is_smu",
    "sample",
    "weights_from_density",
    "FenchelCertificate",
    "FitResult",
    "certify",
    "fit",
    "grenander_1d",
    "distance",
    "hellinger",
    "hellinger_vs_exp_truth",
    "l1_distance",
    "mc_distance",
]
