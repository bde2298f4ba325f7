"""Sampled-belief entropy search for noisy unimodal 1-D maximization."""
from .belief import BeliefCurve, BeliefEnsemble, ParametricFamilySpec, g_bar, g_mixture, update_weights
from .policy import Decision, SbesConfig, SearchState, acquisition_nu, optimize, propose, step
from .posterior import ComparisonOutcome, PiecewiseDensity

__all__ = [
    "BeliefCurve",
    "BeliefEnsemble",
    "ParametricFamilySpec",
    "g_bar",
    "g_mixture",
    "update_weights",
    "ComparisonOutcome",
    "PiecewiseDensity",
    "Decision",
    "SbesConfig",
    "SearchState",
    "acquisition_nu",
    "optimize",
    "propose",
    "step",
]

__version__ = "0.1.0"
