"""Scalar linear-Gaussian AR(1) state-space model.

    x_0 ~ N(m0, P0),  x_t = a x_{t-1} + q eta_t,  y_t = x_t + r eps_t

Its likelihood is available exactly from the Kalman filter, which makes it
the reference model for checking particle-filter estimates.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ..model import StateSpaceModel
from ..priors import ConfigurationError, HalfNormal, Uniform

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# p = [a, q, r, m0, P0]


@njit(cache=True, nogil=True, error_model="numpy")
def _init(p, M, cov, rng):
    x = np.empty((M, 1))
    sd = math.sqrt(p[4])
    for k in range(M):
        x[k, 0] = p[3] + sd * rng.standard_normal()
    return x


@njit(cache=True, nogil=True, error_model="numpy")
def _transition(x, t, p, y, cov, rng):
    out = np.empty_like(x)
    for k in range(x.shape[0]):
        out[k, 0] = p[0] * x[k, 0] + p[1] * rng.standard_normal()
    return out


@njit(cache=True, nogil=True, error_model="numpy")
def _obs(x, t, p, y, cov):
    r = p[2]
    out = np.empty(x.shape[0])
    for k in range(x.shape[0]):
        z = (y[t] - x[k, 0]) / r
        out[k] = -0.5 * z * z - math.log(r) - _LOG_SQRT_2PI
    return out


@njit(cache=True, nogil=True, error_model="numpy")
def _point(x, t, p, y, cov):
    out = np.empty_like(x)
    for k in range(x.shape[0]):
        out[k, 0] = p[0] * x[k, 0]
    return out


class LinearGaussianModel(StateSpaceModel):
    name = "linear_gaussian"
    state_dim = 1

    init_kernel = staticmethod(_init)
    transition_kernel = staticmethod(_transition)
    obs_kernel = staticmethod(_obs)
    point_kernel = staticmethod(_point)

    def __init__(self, m0: float = 0.0, p0: float = 1.0, min_obs_sd: float | None = None):
        if not p0 > 0:
            raise ConfigurationError("initial state variance must be positive")
        self.m0 = float(m0)
        self.p0 = float(p0)
        # sup_x N(y; x, r^2) = 1 / (r sqrt(2 pi)), so a parameter-free bound
        # exists only when r is bounded away from zero
        self.min_obs_sd = None if min_obs_sd is None else float(min_obs_sd)

    def parameter_names(self):
        return ("a", "q", "r")

    def default_values(self):
        return {"a": 0.9, "q": 0.3, "r": 0.5}

    def default_fixed(self):
        return ("q", "r")

    def default_priors(self):
        return {"a": Uniform(-1.0, 1.0), "q": HalfNormal(1.0), "r": HalfNormal(1.0)}

    def kernel_params(self, values, y, cov):
        return np.array([values["a"], values["q"], values["r"], self.m0, self.p0])

    def log_bound(self, y):
        if self.min_obs_sd is None:
            return None
        return np.full(np.shape(y)[0], -math.log(self.min_obs_sd) - _LOG_SQRT_2PI)

    def obs_sample(self, x, t, p, cov, rng):
        return x[:, 0] + p[2] * rng.standard_normal(x.shape[0])

    def describe(self):
        return {"model": self.name, "m0": self.m0, "p0": self.p0, "min_obs_sd": self.min_obs_sd}
