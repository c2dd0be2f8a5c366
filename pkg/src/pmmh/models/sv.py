"""Stochastic volatility with leverage and outliers.

    y_t = K_t exp(x_t / 2) eps_t,      Pr(K_t = 2.5) = omega, Pr(K_t = 1) = 1 - omega
    x_t = mu + phi (x_{t-1} - mu) + sigma_eta eta_t

Leverage correlates the observation shock with the next volatility shock,
``corr(eps_{t-1}, eta_t) = rho`` (``timing="lagged"``, the default). The
observation density stays an analytic two-component normal mixture in
``y_t``; the transition from ``t-1`` to ``t`` first draws ``K_{t-1}`` from
its conditional distribution given ``(x_{t-1}, y_{t-1})``, recovers
``eps_{t-1} = y_{t-1} / (K_{t-1} exp(x_{t-1} / 2))`` and then draws
``eta_t = rho eps_{t-1} + sqrt(1 - rho^2) zeta``.

``timing="contemporaneous"`` uses ``corr(eps_t, eta_t) = rho`` instead. The
particle state then carries ``eta_t`` and the observation density depends on
it, so no parameter-free bound on that density exists.

The sampled variance parameter is ``sigma2_eta``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ..model import StateSpaceModel
from ..priors import ConfigurationError, InverseGamma, Normal, PointMass, TruncNormal

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
OUTLIER_SCALE = 2.5

# p = [mu, phi, sigma_eta, rho, omega, x0_mean, x0_sd, stationary]


@njit(cache=True, nogil=True, error_model="numpy")
def _init(p, M, cov, rng):
    x = np.zeros((M, 2))
    if p[7] > 0:
        m = p[0]
        sd = p[2] / math.sqrt(1.0 - p[1] * p[1])
    else:
        m = p[5]
        sd = p[6]
    for k in range(M):
        x[k, 0] = m + sd * rng.standard_normal()
    return x


@njit(cache=True, nogil=True, error_model="numpy")
def _log_mix(y, x, omega, shift, scale):
    """log[(1-omega) N(y; shift, e^x scale) + omega N(y; 2.5 shift, 6.25 e^x scale)]."""
    v1 = math.exp(x) * scale
    d1 = y - shift
    l1 = -0.5 * d1 * d1 / v1 - 0.5 * math.log(v1) - _LOG_SQRT_2PI
    if omega <= 0.0:
        return l1
    v2 = v1 * OUTLIER_SCALE * OUTLIER_SCALE
    d2 = y - OUTLIER_SCALE * shift
    l2 = -0.5 * d2 * d2 / v2 - 0.5 * math.log(v2) - _LOG_SQRT_2PI
    a = math.log1p(-omega) + l1
    b = math.log(omega) + l2
    hi = max(a, b)
    return hi + math.log1p(math.exp(min(a, b) - hi))


@njit(cache=True, nogil=True, error_model="numpy")
def _obs_lagged(x, t, p, y, cov):
    out = np.empty(x.shape[0])
    for k in range(x.shape[0]):
        out[k] = _log_mix(y[t], x[k, 0], p[4], 0.0, 1.0)
    return out


@njit(cache=True, nogil=True, error_model="numpy")
def _obs_contemporaneous(x, t, p, y, cov):
    rho = p[3]
    scale = 1.0 - rho * rho
    out = np.empty(x.shape[0])
    for k in range(x.shape[0]):
        shift = math.exp(0.5 * x[k, 0]) * rho * x[k, 1]
        out[k] = _log_mix(y[t], x[k, 0], p[4], shift, scale)
    return out


@njit(cache=True, nogil=True, error_model="numpy")
def _prob_outlier(yv, xv, omega):
    if omega <= 0.0:
        return 0.0
    v1 = math.exp(xv)
    v2 = v1 * OUTLIER_SCALE * OUTLIER_SCALE
    a = math.log1p(-omega) - 0.5 * yv * yv / v1 - 0.5 * math.log(v1)
    b = math.log(omega) - 0.5 * yv * yv / v2 - 0.5 * math.log(v2)
    return 1.0 / (1.0 + math.exp(a - b))


@njit(cache=True, nogil=True, error_model="numpy")
def _transition_plain(x, t, p, y, cov, rng):
    mu, phi, sig = p[0], p[1], p[2]
    out = np.zeros_like(x)
    for k in range(x.shape[0]):
        out[k, 0] = mu + phi * (x[k, 0] - mu) + sig * rng.standard_normal()
    return out


@njit(cache=True, nogil=True, error_model="numpy")
def _transition_lagged(x, t, p, y, cov, rng):
    mu, phi, sig, rho, omega = p[0], p[1], p[2], p[3], p[4]
    out = np.zeros_like(x)
    c = math.sqrt(1.0 - rho * rho)
    for k in range(x.shape[0]):
        xk = x[k, 0]
        if t > 0 and rho != 0.0:
            K = 1.0
            if omega > 0.0 and rng.random() < _prob_outlier(y[t - 1], xk, omega):
                K = OUTLIER_SCALE
            e = y[t - 1] * math.exp(-0.5 * xk) / K
            eta = rho * e + c * rng.standard_normal()
        else:
            eta = rng.standard_normal()
        out[k, 0] = mu + phi * (xk - mu) + sig * eta
    return out


@njit(cache=True, nogil=True, error_model="numpy")
def _point_lagged(x, t, p, y, cov):
    mu, phi, sig, rho, omega = p[0], p[1], p[2], p[3], p[4]
    out = np.zeros_like(x)
    for k in range(x.shape[0]):
        xk = x[k, 0]
        m = mu + phi * (xk - mu)
        if t > 0 and rho != 0.0:
            po = _prob_outlier(y[t - 1], xk, omega)
            e = y[t - 1] * math.exp(-0.5 * xk) * ((1.0 - po) + po / OUTLIER_SCALE)
            m += sig * rho * e
        out[k, 0] = m
    return out


@njit(cache=True, nogil=True, error_model="numpy")
def _transition_contemporaneous(x, t, p, y, cov, rng):
    mu, phi, sig = p[0], p[1], p[2]
    out = np.empty_like(x)
    for k in range(x.shape[0]):
        eta = rng.standard_normal()
        out[k, 0] = mu + phi * (x[k, 0] - mu) + sig * eta
        out[k, 1] = eta
    return out


@njit(cache=True, nogil=True, error_model="numpy")
def _point_contemporaneous(x, t, p, y, cov):
    mu, phi = p[0], p[1]
    out = np.zeros_like(x)
    for k in range(x.shape[0]):
        out[k, 0] = mu + phi * (x[k, 0] - mu)
    return out


class StochasticVolatilityModel(StateSpaceModel):
    """SV model; ``leverage=False`` pins ``rho`` to 0 and uses the plain AR(1)
    transition, ``omega=0`` removes outliers."""

    state_dim = 2

    def __init__(
        self,
        leverage: bool = True,
        omega: float = 0.0,
        timing: str = "lagged",
        initial_state: str | dict = "prior",
        x0_mean: float = 0.0,
        x0_sd: float = 10.0,
        name: str | None = None,
    ):
        if not 0.0 <= omega < 1.0:
            raise ConfigurationError("outlier probability omega must lie in [0, 1)")
        if timing not in ("lagged", "contemporaneous"):
            raise ConfigurationError(f"unknown leverage timing {timing!r}")
        if initial_state not in ("prior", "stationary"):
            raise ConfigurationError("initial_state must be 'prior' or 'stationary'")
        if not x0_sd > 0:
            raise ConfigurationError("x0_sd must be positive")
        self.leverage = bool(leverage)
        self.omega = float(omega)
        self.timing = timing
        self.initial_state = initial_state
        self.x0_mean = float(x0_mean)
        self.x0_sd = float(x0_sd)
        self.name = name or _default_name(self.leverage, self.omega)

        self.init_kernel = _init
        if not self.leverage:
            self.transition_kernel = _transition_plain
            self.obs_kernel = _obs_lagged
            self.point_kernel = _point_contemporaneous
        elif timing == "lagged":
            self.transition_kernel = _transition_lagged
            self.obs_kernel = _obs_lagged
            self.point_kernel = _point_lagged
        else:
            self.transition_kernel = _transition_contemporaneous
            self.obs_kernel = _obs_contemporaneous
            self.point_kernel = _point_contemporaneous

    def parameter_names(self):
        return ("mu", "phi", "sigma2_eta", "rho")

    def default_values(self):
        return {"mu": 0.0, "phi": 0.9, "sigma2_eta": 0.05, "rho": 0.0}

    def default_fixed(self):
        return () if self.leverage else ("rho",)

    def default_priors(self):
        return {
            "mu": Normal(0.0, 10.0),
            "phi": TruncNormal(0.9, 0.1, 0.0, 1.0),
            "sigma2_eta": InverseGamma(0.01, 0.01),
            "rho": TruncNormal(0.0, 1e6, -1.0, 1.0) if self.leverage else PointMass(0.0),
        }

    def kernel_params(self, values, y, cov):
        rho = values["rho"] if self.leverage else 0.0
        return np.array(
            [
                values["mu"],
                values["phi"],
                math.sqrt(values["sigma2_eta"]),
                rho,
                self.omega,
                self.x0_mean,
                self.x0_sd,
                1.0 if self.initial_state == "stationary" else 0.0,
            ]
        )

    def log_bound(self, y):
        if self.leverage and self.timing == "contemporaneous":
            return None
        # sup over x of N(y; 0, K^2 e^x) is (2 pi e y^2)^(-1/2) for either K,
        # so the same value bounds the mixture
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            return -0.5 * (math.log(2.0 * math.pi) + 1.0 + np.log(y * y))

    def obs_sample(self, x, t, p, cov, rng):
        n = x.shape[0]
        K = np.where(rng.random(n) < self.omega, OUTLIER_SCALE, 1.0)
        eps = rng.standard_normal(n)
        if self.leverage and self.timing == "contemporaneous":
            rho = p[3]
            eps = rho * x[:, 1] + math.sqrt(1.0 - rho * rho) * eps
        return K * np.exp(0.5 * x[:, 0]) * eps

    def describe(self):
        return {
            "model": self.name,
            "leverage": self.leverage,
            "omega": self.omega,
            "timing": self.timing,
            "initial_state": self.initial_state,
            "x0_mean": self.x0_mean,
            "x0_sd": self.x0_sd,
        }


def _default_name(leverage, omega):
    if leverage and omega > 0:
        return "sv_leverage_outlier"
    if leverage:
        return "sv_leverage"
    if omega > 0:
        return "sv_outlier"
    return "sv"
