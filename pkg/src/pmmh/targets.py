"""Posterior targets seen by the samplers.

A target works on the dense vector of free parameters. It supplies the
log-prior and a log-likelihood that is either estimated by a particle
filter (with an explicit seed, so each call is reproducible) or computed
exactly, which is useful for checking the samplers.
"""

from __future__ import annotations

import math
from typing import Callable, Mapping

import numpy as np

from .filters import FilterSettings, apf_filter, sir_filter
from .model import StateSpaceModel
from .oracle import LinearGaussianSsm, kalman_loglik
from .parallel import WorkerPool, averaged_likelihood, worker_seeds
from .params import ParameterVector
from .priors import ConfigurationError, Prior


class Target:
    """Common parameter and prior handling."""

    def __init__(self, template: ParameterVector, prior: Mapping[str, Prior]):
        missing = [n for n in template.free_names if n not in prior]
        if missing:
            raise ConfigurationError(f"no prior for free parameters {missing}")
        self.template = template
        self.prior = dict(prior)
        self._free_priors = [self.prior[n] for n in template.free_names]

    @property
    def names(self) -> tuple[str, ...]:
        return self.template.free_names

    @property
    def dim(self) -> int:
        return self.template.dim

    def values(self, theta) -> dict[str, float]:
        return self.template.unpack(theta).as_dict()

    def log_prior(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        if not np.all(np.isfinite(theta)):
            return -np.inf
        total = 0.0
        for dist, v in zip(self._free_priors, theta):
            lp = float(dist.logpdf(v))
            if lp == -np.inf:
                return -np.inf
            total += lp
        return total

    def prior_draw(self, rng) -> np.ndarray:
        return np.array([float(dist.sample(rng)) for dist in self._free_priors])

    def pack(self, values: Mapping[str, float]) -> np.ndarray:
        unknown = set(values) - set(self.template.names)
        if unknown:
            raise ConfigurationError(f"unknown parameters {sorted(unknown)}")
        return self.template.with_values(**values).pack()

    def default_sigma1(self, theta0) -> np.ndarray:
        """Diagonal of prior variances; an infinite variance is replaced by
        ``max(theta0_i^2, 1e-6)``."""
        var = np.array([float(d.variance) for d in self._free_priors])
        fallback = np.maximum(np.asarray(theta0, dtype=float) ** 2, 1e-6)
        var = np.where(np.isfinite(var) & (var > 0), var, fallback)
        return np.diag(var)

    def log_likelihood(self, theta, seed: int, particles: int | None = None) -> float:
        raise NotImplementedError


class ParticleTarget(Target):
    """Likelihood estimated by the SIR or auxiliary particle filter.

    With ``workers > 1`` every evaluation averages that many independent
    filters (the first parallel scheme).
    """

    def __init__(
        self,
        model: StateSpaceModel,
        y,
        prior: Mapping[str, Prior] | None = None,
        template: ParameterVector | None = None,
        settings: FilterSettings = FilterSettings(),
        kind: str = "sir",
        covariates=None,
        workers: int = 1,
        pool: WorkerPool | None = None,
    ):
        if kind not in ("sir", "apf"):
            raise ConfigurationError(f"unknown filter {kind!r}; expected 'sir' or 'apf'")
        template = template or model.parameter_vector()
        prior = {**model.default_priors(), **(prior or {})}
        super().__init__(template, prior)
        self.model = model
        self.y = np.ascontiguousarray(y, dtype=float)
        self.cov = model.covariate_matrix(covariates, self.y.shape[0]) if (
            covariates is None or isinstance(covariates, Mapping)
        ) else np.ascontiguousarray(covariates, dtype=float)
        self.settings = settings
        self.kind = kind
        self.workers = int(workers)
        self.pool = pool
        if kind == "apf" and settings.apf_epsilon > 0:
            bound = model.log_bound(self.y)
            if bound is None or not np.all(np.isfinite(bound)):
                raise ConfigurationError(
                    f"{model.name}: the defensive auxiliary filter needs a finite observation bound"
                )

    def estimate(self, theta, seed: int, particles: int | None = None):
        values = self.values(theta)
        settings = self.settings if particles is None else FilterSettings(
            particles, self.settings.resampling, self.settings.apf_epsilon, self.settings.rng_seed
        )
        if self.workers == 1:
            filt = sir_filter if self.kind == "sir" else apf_filter
            return filt(self.model, values, self.y, settings.with_seed(seed), self.cov)[0]
        return averaged_likelihood(
            self.model, values, self.y, settings, worker_seeds(seed, self.workers),
            self.pool, self.kind, self.cov,
        )

    def log_likelihood(self, theta, seed: int, particles: int | None = None) -> float:
        return self.estimate(theta, seed, particles).total


class ExactTarget(Target):
    """Target whose log-likelihood is a deterministic function of the values."""

    def __init__(self, loglik: Callable[[dict], float], template: ParameterVector, prior):
        super().__init__(template, prior)
        self._loglik = loglik

    def log_likelihood(self, theta, seed: int = 0, particles: int | None = None) -> float:
        return float(self._loglik(self.values(theta)))

    @classmethod
    def kalman(cls, model, y, prior=None, template=None) -> "ExactTarget":
        """Exact likelihood of a :class:`LinearGaussianModel` by the Kalman filter."""
        template = template or model.parameter_vector()
        prior = {**model.default_priors(), **(prior or {})}
        y = np.asarray(y, dtype=float)

        def loglik(v):
            if not (v["q"] > 0 and v["r"] > 0):
                return -math.inf
            ssm = LinearGaussianSsm(v["a"], v["q"], v["r"], model.m0, model.p0)
            return kalman_loglik(ssm, y)

        return cls(loglik, template, prior)
