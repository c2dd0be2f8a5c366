"""Poisson state-space models.

Random walk level::

    y_t ~ P(exp(mu_t)),  mu_t = mu_{t-1} + sigma eps_t,  mu_0 a parameter

Level, slope, seasonality and covariates::

    y_t   ~ P(exp(x_t beta + mu_t + s_t))
    mu_t  = mu_{t-1} + a_{t-1} + delta I(t = t_int) + sigma eps_t
    a_t   = a_{t-1} + tau xi_t
    s_t   = sum_j alpha_j cos(w_j t) + gamma_j sin(w_j t),   w_j = 2 pi j / h

Time ``t`` runs from 1 to ``T`` in these formulas. The sampled variance
parameters are ``sigma2`` and ``tau2``.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from numba import njit
from scipy.special import gammaln

from ..model import StateSpaceModel
from ..priors import ConfigurationError, HalfNormal, Normal, Prior

MAX_LOG_RATE = 700.0


@njit(cache=True, nogil=True, error_model="numpy")
def poisson_logpmf(y, log_rate):
    """``log P(y; exp(log_rate))``; ``-inf`` once the rate would overflow."""
    if log_rate > MAX_LOG_RATE:
        return -np.inf
    return y * log_rate - math.exp(log_rate) - math.lgamma(y + 1.0)


def poisson_log_bound(y):
    """``log sup_lambda P(y; lambda) = y log y - y - log y!`` (zero at ``y = 0``)."""
    y = np.asarray(y, dtype=float)
    safe = np.where(y > 0, y, 1.0)
    return np.where(y > 0, y * np.log(safe) - y, 0.0) - gammaln(y + 1.0)


def _poisson_sample(log_rate, rng):
    rate = np.exp(np.minimum(log_rate, MAX_LOG_RATE))
    return rng.poisson(rate).astype(float)


# ---------------------------------------------------------------------------
# random walk level, p = [sigma, mu0]


@njit(cache=True, nogil=True, error_model="numpy")
def _rw_init(p, M, cov, rng):
    return np.full((M, 1), p[1])


@njit(cache=True, nogil=True, error_model="numpy")
def _rw_transition(x, t, p, y, cov, rng):
    out = np.empty_like(x)
    for k in range(x.shape[0]):
        out[k, 0] = x[k, 0] + p[0] * rng.standard_normal()
    return out


@njit(cache=True, nogil=True, error_model="numpy")
def _rw_obs(x, t, p, y, cov):
    out = np.empty(x.shape[0])
    for k in range(x.shape[0]):
        out[k] = poisson_logpmf(y[t], x[k, 0])
    return out


@njit(cache=True, nogil=True, error_model="numpy")
def _rw_point(x, t, p, y, cov):
    return x.copy()


class PoissonRandomWalkModel(StateSpaceModel):
    name = "poisson_rw"
    state_dim = 1
    count_data = True

    init_kernel = staticmethod(_rw_init)
    transition_kernel = staticmethod(_rw_transition)
    obs_kernel = staticmethod(_rw_obs)
    point_kernel = staticmethod(_rw_point)

    def parameter_names(self):
        return ("sigma2", "mu0")

    def default_values(self):
        return {"sigma2": 0.05, "mu0": 0.4324}

    def default_priors(self):
        return {"sigma2": HalfNormal(1.0), "mu0": Normal(0.4324, 9.0)}

    def kernel_params(self, values, y, cov):
        return np.array([math.sqrt(values["sigma2"]), values["mu0"]])

    def log_bound(self, y):
        return poisson_log_bound(y)

    def obs_sample(self, x, t, p, cov, rng):
        return _poisson_sample(x[:, 0], rng)


# ---------------------------------------------------------------------------
# level + slope + seasonal + covariates
# p = [mu0, a0, sigma, tau, delta, t_int index, offset_0, ..., offset_{T-1}]

_OFFSET = 6


@njit(cache=True, nogil=True, error_model="numpy")
def _st_init(p, M, cov, rng):
    x = np.empty((M, 2))
    for k in range(M):
        x[k, 0] = p[0]
        x[k, 1] = p[1]
    return x


@njit(cache=True, nogil=True, error_model="numpy")
def _st_transition(x, t, p, y, cov, rng):
    sigma, tau = p[2], p[3]
    jump = p[4] if t == int(p[5]) else 0.0
    out = np.empty_like(x)
    for k in range(x.shape[0]):
        out[k, 0] = x[k, 0] + x[k, 1] + jump + sigma * rng.standard_normal()
        out[k, 1] = x[k, 1] + tau * rng.standard_normal()
    return out


@njit(cache=True, nogil=True, error_model="numpy")
def _st_obs(x, t, p, y, cov):
    off = p[_OFFSET + t]
    out = np.empty(x.shape[0])
    for k in range(x.shape[0]):
        out[k] = poisson_logpmf(y[t], x[k, 0] + off)
    return out


@njit(cache=True, nogil=True, error_model="numpy")
def _st_point(x, t, p, y, cov):
    jump = p[4] if t == int(p[5]) else 0.0
    out = np.empty_like(x)
    for k in range(x.shape[0]):
        out[k, 0] = x[k, 0] + x[k, 1] + jump
        out[k, 1] = x[k, 1]
    return out


class PoissonStructuralModel(StateSpaceModel):
    """Poisson model with dynamic level and slope, ``J`` seasonal harmonics,
    an optional intervention at ``t_int`` (1-based) and regression on the
    named covariate columns.

    ``fixed_beta`` pins the regression coefficients (for example to 1, which
    makes a log-exposure covariate an offset). ``frequencies`` overrides the
    default ``2 pi j / h``.
    """

    name = "poisson_structural"
    state_dim = 2
    count_data = True

    init_kernel = staticmethod(_st_init)
    transition_kernel = staticmethod(_st_transition)
    obs_kernel = staticmethod(_st_obs)
    point_kernel = staticmethod(_st_point)

    def __init__(
        self,
        harmonics: int = 1,
        period: float = 12.0,
        t_int: int | None = None,
        covariates: Sequence[str] = (),
        fixed_beta: Sequence[float] | float | None = None,
        frequencies: Sequence[float] | None = None,
        hyper: dict | None = None,
    ):
        if harmonics < 0:
            raise ConfigurationError("number of harmonics must be nonnegative")
        if not period > 0:
            raise ConfigurationError("seasonal period must be positive")
        self.harmonics = int(harmonics)
        self.period = float(period)
        if frequencies is None:
            self.frequencies = tuple(2.0 * math.pi * j / self.period for j in range(1, self.harmonics + 1))
        else:
            self.frequencies = tuple(float(w) for w in frequencies)
            if len(self.frequencies) != self.harmonics:
                raise ConfigurationError("need one frequency per harmonic")
        self.t_int = None if t_int is None else int(t_int)
        if self.t_int is not None and self.t_int < 1:
            raise ConfigurationError("intervention time is 1-based and must be >= 1")
        self.covariate_names = tuple(covariates)
        if fixed_beta is not None:
            fb = np.broadcast_to(np.asarray(fixed_beta, dtype=float), (len(self.covariate_names),))
            self.fixed_beta = tuple(float(b) for b in fb)
        else:
            self.fixed_beta = None
        self.hyper = {
            "mu0_mean": 0.0,
            "mu0_var": 1.0,
            "a0_var": 0.005,
            "sigma2_scale2": 0.2,
            "tau2_scale2": 0.002,
            "alpha_var": 0.005,
            "gamma_var": 0.005,
            "beta_var": 1.0,
            "delta_var": 1.0,
        }
        if hyper:
            unknown = set(hyper) - set(self.hyper)
            if unknown:
                raise ConfigurationError(f"unknown hyperparameters {sorted(unknown)}")
            self.hyper.update({k: float(v) for k, v in hyper.items()})

    # -- parameters ---------------------------------------------------------

    def _beta_names(self):
        return tuple(f"beta_{i + 1}" for i in range(len(self.covariate_names)))

    def parameter_names(self):
        names = ["mu0", "a0", "sigma2", "tau2"]
        if self.t_int is not None:
            names.append("delta")
        for j in range(1, self.harmonics + 1):
            names += [f"alpha_{j}", f"gamma_{j}"]
        return tuple(names) + self._beta_names()

    def default_values(self):
        vals = {n: 0.0 for n in self.parameter_names()}
        vals.update(mu0=self.hyper["mu0_mean"], sigma2=0.01, tau2=0.0005)
        if self.fixed_beta is not None:
            vals.update(zip(self._beta_names(), self.fixed_beta))
        return vals

    def default_fixed(self):
        return self._beta_names() if self.fixed_beta is not None else ()

    def default_priors(self) -> dict[str, Prior]:
        h = self.hyper
        pri: dict[str, Prior] = {
            "mu0": Normal(h["mu0_mean"], math.sqrt(h["mu0_var"])),
            "a0": Normal(0.0, math.sqrt(h["a0_var"])),
            "sigma2": HalfNormal(math.sqrt(h["sigma2_scale2"])),
            "tau2": HalfNormal(math.sqrt(h["tau2_scale2"])),
        }
        if self.t_int is not None:
            pri["delta"] = Normal(0.0, math.sqrt(h["delta_var"]))
        for j in range(1, self.harmonics + 1):
            pri[f"alpha_{j}"] = Normal(0.0, math.sqrt(h["alpha_var"]))
            pri[f"gamma_{j}"] = Normal(0.0, math.sqrt(h["gamma_var"]))
        for b in self._beta_names():
            pri[b] = Normal(0.0, math.sqrt(h["beta_var"]))
        return pri

    # -- kernels --------------------------------------------------------------

    def seasonal(self, values, T: int) -> np.ndarray:
        """``s_t`` for ``t = 1..T``."""
        t = np.arange(1, T + 1, dtype=float)
        s = np.zeros(T)
        for j, w in enumerate(self.frequencies, start=1):
            s += values[f"alpha_{j}"] * np.cos(w * t) + values[f"gamma_{j}"] * np.sin(w * t)
        return s

    def offsets(self, values, cov) -> np.ndarray:
        T = cov.shape[0]
        off = self.seasonal(values, T)
        if self.covariate_names:
            beta = np.array([values[b] for b in self._beta_names()])
            off = off + cov @ beta
        return off

    def kernel_params(self, values, y, cov):
        T = np.shape(y)[0]
        cov = np.asarray(cov, dtype=float).reshape(T, -1)
        delta = values.get("delta", 0.0) if self.t_int is not None else 0.0
        # the transition into time t (1-based) runs at 0-based index t - 1
        t_idx = self.t_int - 1 if self.t_int is not None else -1
        head = [
            values["mu0"],
            values["a0"],
            math.sqrt(values["sigma2"]),
            math.sqrt(values["tau2"]),
            delta,
            float(t_idx),
        ]
        return np.concatenate([head, self.offsets(values, cov)])

    def log_bound(self, y):
        return poisson_log_bound(y)

    def obs_sample(self, x, t, p, cov, rng):
        return _poisson_sample(x[:, 0] + p[_OFFSET + t], rng)

    def describe(self):
        return {
            "model": self.name,
            "harmonics": self.harmonics,
            "period": self.period,
            "frequencies": list(self.frequencies),
            "t_int": self.t_int,
            "covariates": list(self.covariate_names),
            "fixed_beta": None if self.fixed_beta is None else list(self.fixed_beta),
            "hyper": dict(self.hyper),
        }
