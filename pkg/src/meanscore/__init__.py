"""Mean score sensitivity analysis for trial outcomes missing not at random."""

from .data import DeltaSpec, TrialDataset
from .estimator import MeanScoreFit, fit_mean_score
from .glm import IDENTITY, LOGIT, GlmFamily, GlmFit, fit_glm
from .inference import IntervalEstimate, confidence_interval, standard_analysis
from .io import RunConfig, emit_results, impute_baseline_mean, load_dataset
from .sweep import SweepRow, run_sweep
from .tworeg import TwoRegFit, fit_two_linreg

__all__ = [
    "DeltaSpec",
    "GlmFamily",
    "GlmFit",
    "IDENTITY",
    "IntervalEstimate",
    "LOGIT",
    "MeanScoreFit",
    "RunConfig",
    "SweepRow",
    "TrialDataset",
    "TwoRegFit",
    "confidence_interval",
    "emit_results",
    "fit_glm",
    "fit_mean_score",
    "fit_two_linreg",
    "impute_baseline_mean",
    "load_dataset",
    "run_sweep",
    "standard_analysis",
]

__version__ = "0.1.0"
