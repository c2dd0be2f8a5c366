"""Adaptive Metropolis-Hastings proposals."""

from .imh import AdaptiveIndependentProposal, growth_components
from .mixture import GaussianMixture, MixtureFitError, fit_mixture
from .rwm import AdaptiveRandomWalk, RunningMoments, component_weights, default_kappas

__all__ = [
    "AdaptiveIndependentProposal",
    "AdaptiveRandomWalk",
    "GaussianMixture",
    "MixtureFitError",
    "RunningMoments",
    "component_weights",
    "default_kappas",
    "fit_mixture",
    "growth_components",
]
