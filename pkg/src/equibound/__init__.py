"""Bounds on equivocation, mutual information and minimum error probability
for Bayesian multi-hypothesis testing, estimated by Monte Carlo."""

from ._validation import DegenerateInputError, InvalidStatisticsError
from .bounds import (
    ClampWarning,
    capacity_mi_upper,
    cfm_phi_star,
    convex_phi,
    delta_ee_lower,
    delta_ee_lower_split,
    fano1_ee_upper,
    fano2_ee_upper,
    fano_ee_upper,
    fm_ee_lower,
    fmbn_ee_lower,
    mpe_upper_bn,
    mpe_upper_fm,
    mpe_upper_integral,
    mpe_upper_lambda,
    phi_two,
)
from .config import ConfigError, RunConfig, parse_config, render_config
from .core import (
    ChannelDensity,
    GaussianChannel,
    HypothesisModel,
    HypothesisSet,
    PosteriorVector,
    Prior,
    map_decision,
    posterior,
    tilt,
    tilted_posterior,
)
from .estimators import BoundsEstimator, GaussianPosterior
from .flem import FlemConfig, build_model, psbr_sweep
from .mc import (
    MCEstimate,
    OrderedStats,
    SampleBatch,
    estimate_bn,
    estimate_delta_integral,
    estimate_equivocation,
    estimate_fmi,
    estimate_gee,
    estimate_gee_integral,
    estimate_mi,
    estimate_mpe,
    estimate_ordered_stats,
    sample_joint,
)
from .report import BoundReport, Report, ReportConfig, assemble_report

__version__ = "0.1.0"

__all__ = [
    "ClampWarning",
    "capacity_mi_upper",
    "cfm_phi_star",
    "convex_phi",
    "delta_ee_lower",
    "delta_ee_lower_split",
    "fano1_ee_upper",
    "fano2_ee_upper",
    "fano_ee_upper",
    "fm_ee_lower",
    "fmbn_ee_lower",
    "mpe_upper_bn",
    "mpe_upper_fm",
    "mpe_upper_integral",
    "mpe_upper_lambda",
    "phi_two",
    "ChannelDensity",
    "GaussianChannel",
    "HypothesisModel",
    "HypothesisSet",
    "PosteriorVector",
    "Prior",
    "map_decision",
    "posterior",
    "tilt",
    "tilted_posterior",
    "MCEstimate",
    "OrderedStats",
    "SampleBatch",
    "estimate_bn",
    "estimate_delta_integral",
    "estimate_equivocation",
    "estimate_fmi",
    "estimate_gee",
    "estimate_gee_integral",
    "estimate_mi",
    "estimate_mpe",
    "estimate_ordered_stats",
    "sample_joint",
    "DegenerateInputError",
    "InvalidStatisticsError",
    "ConfigError",
    "RunConfig",
    "parse_config",
    "render_config",
    "BoundsEstimator",
    "GaussianPosterior",
    "FlemConfig",
    "build_model",
    "psbr_sweep",
    "BoundReport",
    "Report",
    "ReportConfig",
    "assemble_report",
]
