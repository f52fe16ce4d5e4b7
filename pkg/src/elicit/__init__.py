"""Variational f-divergence estimation and truthful sample-elicitation mechanisms."""

from .critic import FeatureBasisCritic, FitConfig, FixedCritic, MlpCritic, fit
from .estimator import DivergenceEstimate, estimate_divergence, estimate_mutual_information
from .fdiv import DIVERGENCE_NAMES, AnalyticDensity, FDivergenceSpec, closed_form_divergence, get_divergence
from .mechanism import MechanismConfig, PaymentSheet, score_peer_prediction, score_with_ground_truth
from .reconstruct import ParametricFamily, ScheduleConfig, reconstruct
from .samples import EmpiricalDistribution, PairedSamples
from .simlab import GaussianWorld, ReportStrategy, get_world, run_convergence_sweep, run_score_table

__all__ = [
    "AnalyticDensity",
    "DIVERGENCE_NAMES",
    "DivergenceEstimate",
    "EmpiricalDistribution",
    "FDivergenceSpec",
    "FeatureBasisCritic",
    "FitConfig",
    "FixedCritic",
    "GaussianWorld",
    "MechanismConfig",
    "MlpCritic",
    "PairedSamples",
    "ParametricFamily",
    "PaymentSheet",
    "ReportStrategy",
    "ScheduleConfig",
    "closed_form_divergence",
    "estimate_divergence",
    "estimate_mutual_information",
    "fit",
    "get_divergence",
    "get_world",
    "reconstruct",
    "run_convergence_sweep",
    "run_score_table",
    "score_peer_prediction",
    "score_with_ground_truth",
]
