"""Negative-binomial count model obtained from a Poisson-gamma latent process.

    y_t | z_t     ~ NB(nu + z_t,     (alpha + beta) / (alpha + beta + 1))
    z_t | z_{t-1} ~ NB(nu + z_{t-1}, (alpha + beta) / (2 alpha + beta))
    z_0           ~ NB(nu, beta / (alpha + beta))

``NB(r, p)`` counts failures before the ``r``-th success, with mean
``r (1 - p) / p``. The stationary marginal of ``y_t`` is ``NB(nu, beta / (beta + 1))``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ..model import StateSpaceModel
from ..priors import HalfNormal

# p = [nu, alpha, beta]


@njit(cache=True, nogil=True, error_model="numpy")
def nb_logpmf(y, r, prob):
    """``log NB(y; r, prob)`` via log-gamma, finite for any ``r > 0``."""
    if y < 0 or r <= 0.0:
        return -np.inf
    out = math.lgamma(r + y) - math.lgamma(r) - math.lgamma(y + 1.0) + r * math.log(prob)
    if y > 0:
        out += y * math.log1p(-prob)
    return out


@njit(cache=True, nogil=True, error_model="numpy")
def _init(p, M, cov, rng):
    nu, alpha, beta = p[0], p[1], p[2]
    x = np.empty((M, 1))
    q = beta / (alpha + beta)
    for k in range(M):
        x[k, 0] = rng.negative_binomial(nu, q)
    return x


@njit(cache=True, nogil=True, error_model="numpy")
def _transition(x, t, p, y, cov, rng):
    nu, alpha, beta = p[0], p[1], p[2]
    q = (alpha + beta) / (2.0 * alpha + beta)
    out = np.empty_like(x)
    for k in range(x.shape[0]):
        out[k, 0] = rng.negative_binomial(nu + x[k, 0], q)
    return out


@njit(cache=True, nogil=True, error_model="numpy")
def _obs(x, t, p, y, cov):
    nu, alpha, beta = p[0], p[1], p[2]
    q = (alpha + beta) / (alpha + beta + 1.0)
    out = np.empty(x.shape[0])
    for k in range(x.shape[0]):
        out[k] = nb_logpmf(y[t], nu + x[k, 0], q)
    return out


@njit(cache=True, nogil=True, error_model="numpy")
def _point(x, t, p, y, cov):
    # conditional mean of z_t given z_{t-1}
    nu, alpha, beta = p[0], p[1], p[2]
    out = np.empty_like(x)
    for k in range(x.shape[0]):
        out[k, 0] = (nu + x[k, 0]) * alpha / (alpha + beta)
    return out


class NegativeBinomialModel(StateSpaceModel):
    name = "negbin"
    state_dim = 1
    count_data = True

    init_kernel = staticmethod(_init)
    transition_kernel = staticmethod(_transition)
    obs_kernel = staticmethod(_obs)
    point_kernel = staticmethod(_point)

    def parameter_names(self):
        return ("nu", "alpha", "beta")

    def default_values(self):
        return {"nu": 3.0, "alpha": 10.0, "beta": 2.0}

    def default_priors(self):
        return {"nu": HalfNormal(5.0), "alpha": HalfNormal(20.0), "beta": HalfNormal(5.0)}

    def kernel_params(self, values, y, cov):
        return np.array([values["nu"], values["alpha"], values["beta"]])

    def log_bound(self, y):
        # a probability mass function never exceeds one
        return np.zeros(np.shape(y)[0])

    def obs_sample(self, x, t, p, cov, rng):
        nu, alpha, beta = p
        return rng.negative_binomial(nu + x[:, 0], (alpha + beta) / (alpha + beta + 1.0)).astype(float)

    def marginal_probability(self, values) -> float:
        """Success probability of the stationary marginal ``NB(nu, beta / (beta + 1))``."""
        return values["beta"] / (values["beta"] + 1.0)
