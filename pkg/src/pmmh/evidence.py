"""Marginal likelihood by bridge sampling and by importance sampling.

Both estimators use the final independence-sampler proposal ``q``. Writing
``f(theta) = p(y | theta) p(theta)`` (with the particle-filter estimate in
place of the likelihood) and ``t(theta) = 1 / (f(theta) / U + q(theta))``,

    A  = mean over posterior draws of t q,
    A1 = mean over fresh q draws of t f,
    p_BS(y) = A1 / A,            p_IS(y) = mean over q draws of f / q.

Everything is computed on the log scale.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import logsumexp

from .parallel import WorkerPool, derive_seed

log = logging.getLogger(__name__)


class EvidenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class EvidenceEstimate:
    log_p_bs: float
    log_p_is: float
    log_U: float
    n_posterior: int
    n_q: int

    def to_dict(self) -> dict:
        return asdict(self)


def _log_mean(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(logsumexp(a) - math.log(a.shape[0]))


def bridge_evidence(log_f_post, log_q_post, log_f_q, log_q_q, log_U: float) -> float:
    """``log p_BS(y)`` from posterior draws and ``q`` draws.

    ``log_f_*`` are ``log p(y | theta) + log p(theta)`` and ``log_q_*`` the
    proposal log-densities at the posterior draws and at the ``q`` draws.
    """
    log_f_post, log_q_post = np.asarray(log_f_post, float), np.asarray(log_q_post, float)
    log_f_q, log_q_q = np.asarray(log_f_q, float), np.asarray(log_q_q, float)
    if log_f_post.size == 0 or log_f_q.size == 0:
        raise ValueError("both draw sets must be nonempty")
    log_t_post = -np.logaddexp(log_f_post - log_U, log_q_post)
    log_t_q = -np.logaddexp(log_f_q - log_U, log_q_q)
    log_A = _log_mean(log_t_post + log_q_post)
    log_A1 = _log_mean(log_t_q + log_f_q)
    if not np.isfinite(log_A):
        raise EvidenceError("every t(theta) q(theta) term underflowed; choose U closer to p(y)")
    return log_A1 - log_A


def importance_evidence(log_f_q, log_q_q) -> float:
    """``log p_IS(y)``, the log of the mean of ``f / q`` over ``q`` draws."""
    log_f_q, log_q_q = np.asarray(log_f_q, float), np.asarray(log_q_q, float)
    if log_f_q.size == 0:
        raise ValueError("need at least one proposal draw")
    return _log_mean(log_f_q - log_q_q)


def default_U(draws, log_f_post, q, log_f) -> tuple[float, np.ndarray, bool]:
    """``log U = log f(theta*) - log q(theta*)`` at the posterior mean ``theta*``.

    ``log_f(theta)`` evaluates ``log p(y | theta) + log p(theta)``. If the mean
    is outside the support (or the estimate there is zero), the draw with the
    largest stored ``log_f_post`` is used instead. Returns
    ``(log U, theta*, fallback_used)``.
    """
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    theta = draws.mean(axis=0)
    lf = log_f(theta)
    fallback = not np.isfinite(lf)
    if fallback:
        theta = draws[int(np.argmax(log_f_post))]
        lf = log_f(theta)
        if not np.isfinite(lf):
            lf = float(np.max(log_f_post))
    return float(lf - q.logpdf(theta)), theta, fallback


def estimate_evidence(
    record,
    target,
    seed: int,
    n_q: int | None = None,
    burn_in: float = 0.1,
    u_particles: int | None = None,
    pool: WorkerPool | None = None,
    q=None,
) -> EvidenceEstimate:
    """Bridge and importance sampling estimates from a finished run.

    Posterior draws (after discarding the ``burn_in`` fraction) reuse the
    log-likelihood estimates stored by the chain. ``n_q`` fresh draws from the
    frozen final proposal are evaluated with new filter seeds. ``U`` uses a
    filter with ``u_particles`` particles (default ten times the run's) at the
    posterior mean.
    """
    q = q if q is not None else record.proposal
    if q is None:
        raise ValueError("the run has no mixture proposal; evidence needs the independence sampler")
    start = int(burn_in * record.n)
    draws = record.draws[start:]
    log_f_post = record.loglik[start:] + record.log_prior[start:]
    n_q = draws.shape[0] if n_q is None else int(n_q)
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 2, 0)))
    q_draws = q.sample(rng, n_q)

    def f(i):
        theta = q_draws[i]
        lp = target.log_prior(theta)
        if not np.isfinite(lp):
            return -math.inf
        return target.log_likelihood(theta, derive_seed(seed, 2, 1, i)) + lp

    log_f_q = np.array((pool or WorkerPool()).map(f, range(n_q)))
    log_q_q = q.logpdf(q_draws)
    log_q_post = q.logpdf(draws)

    particles = u_particles
    if particles is None and hasattr(target, "settings"):
        particles = 10 * target.settings.particles

    def log_f(theta):
        lp = target.log_prior(theta)
        if not np.isfinite(lp):
            return -math.inf
        return target.log_likelihood(theta, derive_seed(seed, 2, 2), particles) + lp

    log_U, _, used_fallback = default_U(draws, log_f_post, q, log_f)
    if used_fallback:
        log.info("posterior mean outside the support; U taken at the best posterior draw")
    return EvidenceEstimate(
        log_p_bs=bridge_evidence(log_f_post, log_q_post, log_f_q, log_q_q, log_U),
        log_p_is=importance_evidence(log_f_q, log_q_q),
        log_U=log_U,
        n_posterior=int(draws.shape[0]),
        n_q=n_q,
    )
