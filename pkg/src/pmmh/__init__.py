"""Particle marginal Metropolis-Hastings with adaptive proposals.

The main entry points are :func:`run_chain` for a single chain against a
:class:`ParticleTarget` or :class:`ExactTarget`, :func:`estimate_evidence`
for the marginal likelihood, and :func:`diagnose` for the summary table
quantities. The ``pmmh`` command line wraps all of these behind a YAML
configuration.
"""

from .diagnostics import diagnose, inefficiency, summarize
from .evidence import EvidenceEstimate, bridge_evidence, estimate_evidence, importance_evidence
from .filters import FilterSettings, LogLikelihoodEstimate, NumericalFailure, apf_filter, run_filter, sir_filter
from .kernel import ChainConfig, ChainState, RunRecord, pmmh_step, run_chain
from .model import StateSpaceModel
from .models import MODELS, build_model
from .oracle import LinearGaussianSsm, kalman_loglik, quadrature_evidence
from .parallel import WorkerPool, averaged_likelihood, block_imh_sweep, derive_seed
from .priors import ConfigurationError
from .samplers import AdaptiveIndependentProposal, AdaptiveRandomWalk, GaussianMixture
from .targets import ExactTarget, ParticleTarget

__version__ = "0.1.0"

__all__ = [
    "AdaptiveIndependentProposal",
    "AdaptiveRandomWalk",
    "ChainConfig",
    "ChainState",
    "ConfigurationError",
    "EvidenceEstimate",
    "ExactTarget",
    "FilterSettings",
    "GaussianMixture",
    "LinearGaussianSsm",
    "LogLikelihoodEstimate",
    "MODELS",
    "NumericalFailure",
    "ParticleTarget",
    "RunRecord",
    "StateSpaceModel",
    "WorkerPool",
    "apf_filter",
    "averaged_likelihood",
    "block_imh_sweep",
    "bridge_evidence",
    "build_model",
    "derive_seed",
    "diagnose",
    "estimate_evidence",
    "importance_evidence",
    "inefficiency",
    "kalman_loglik",
    "pmmh_step",
    "quadrature_evidence",
    "run_chain",
    "run_filter",
    "sir_filter",
    "summarize",
]
