"""SIR and auxiliary particle filters returning unbiased likelihood estimates.

The per-step likelihood terms are accumulated on the log scale with a
max-shift, so long series do not underflow. Resampling happens at every
step. When the model kernels are numba-compiled, the whole filter runs in
compiled code; otherwise the identical loop runs in the interpreter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from numba import njit
from numba.extending import is_jitted

from .model import StateSpaceModel
from .params import ParameterVector
from .priors import ConfigurationError

MULTINOMIAL = 0
STRATIFIED = 1
_SCHEMES = {"multinomial": MULTINOMIAL, "stratified": STRATIFIED}

_OK, _ALL_ZERO, _NAN = 0, 1, 2


class NumericalFailure(RuntimeError):
    """A density evaluated to NaN inside the filter."""

    def __init__(self, t: int, message: str = ""):
        self.t = t
        super().__init__(message or f"NaN observation density at t={t}")


@dataclass(frozen=True)
class FilterSettings:
    particles: int = 500
    resampling: str = "stratified"
    apf_epsilon: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.particles < 2:
            raise ConfigurationError("particle filter needs at least 2 particles")
        if self.resampling not in _SCHEMES:
            raise ConfigurationError(f"unknown resampling scheme {self.resampling!r}")
        if not 0.0 <= self.apf_epsilon < 1.0 and self.apf_epsilon != 1.0:
            raise ConfigurationError("apf_epsilon must lie in [0, 1]")

    def with_seed(self, seed: int) -> "FilterSettings":
        return FilterSettings(self.particles, self.resampling, self.apf_epsilon, int(seed))


@dataclass(frozen=True)
class LogLikelihoodEstimate:
    per_step: np.ndarray
    failed: bool = False
    failed_at: int = -1

    @property
    def total(self) -> float:
        return float(np.sum(self.per_step))


@dataclass(frozen=True)
class FilteredMoments:
    mean: np.ndarray
    var: np.ndarray


@dataclass
class ParticleCloud:
    states: np.ndarray
    weights: np.ndarray
    masses: np.ndarray = field(init=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape[0] < 2:
            raise ValueError("a particle cloud needs at least 2 particles")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise NumericalFailure(-1, "particle weights must be finite and nonnegative")
        self.weights = w
        self.masses = w / w.sum()


# ---------------------------------------------------------------------------
# compiled helpers (also callable from the interpreted loop)


@njit(cache=True, nogil=True)
def _normalise(lw):
    """Return ``(log mean weight, normalised masses, status)``."""
    M = lw.shape[0]
    m = -np.inf
    for k in range(M):
        v = lw[k]
        if np.isnan(v):
            return np.nan, np.empty(0), _NAN
        if v > m:
            m = v
    if m == -np.inf:
        return -np.inf, np.empty(0), _ALL_ZERO
    if m == np.inf:
        return np.nan, np.empty(0), _NAN
    w = np.empty(M)
    s = 0.0
    for k in range(M):
        w[k] = math.exp(lw[k] - m)
        s += w[k]
    for k in range(M):
        w[k] /= s
    return m + math.log(s / M), w, _OK


@njit(cache=True, nogil=True)
def _log_sum_exp(lw):
    m = -np.inf
    for k in range(lw.shape[0]):
        if lw[k] > m:
            m = lw[k]
    if m == -np.inf or m == np.inf:
        return m
    s = 0.0
    for k in range(lw.shape[0]):
        s += math.exp(lw[k] - m)
    return m + math.log(s)


@njit(cache=True, nogil=True)
def _resample_indices(masses, u, scheme):
    """Invert the cumulative masses at ``u`` (multinomial) or ``(k + u_k)/M``."""
    M = masses.shape[0]
    n = u.shape[0]
    cum = np.empty(M)
    s = 0.0
    for k in range(M):
        s += masses[k]
        cum[k] = s
    idx = np.empty(n, np.int64)
    if scheme == STRATIFIED:
        j = 0
        for k in range(n):
            v = (k + u[k]) / n * s
            while j < M - 1 and cum[j] <= v:
                j += 1
            idx[k] = j
    else:
        for k in range(n):
            j = np.searchsorted(cum, u[k] * s, side="right")
            idx[k] = min(j, M - 1)
    # never select a zero-mass index at the top end
    for k in range(n):
        while masses[idx[k]] == 0.0 and idx[k] > 0:
            idx[k] -= 1
    return idx


@njit(cache=True, nogil=True)
def _gather(x, idx):
    out = np.empty((idx.shape[0], x.shape[1]))
    for k in range(idx.shape[0]):
        for j in range(x.shape[1]):
            out[k, j] = x[idx[k], j]
    return out


@njit(cache=True, nogil=True)
def _accumulate_moments(x, w, mean, var, t):
    for j in range(x.shape[1]):
        m = 0.0
        for k in range(x.shape[0]):
            m += w[k] * x[k, j]
        v = 0.0
        for k in range(x.shape[0]):
            d = x[k, j] - m
            v += w[k] * d * d
        mean[t, j] = m
        var[t, j] = v


# ---------------------------------------------------------------------------
# filter loops


def _sir_loop(init, trans, obs, p, y, cov, M, scheme, rng, moments):
    T = y.shape[0]
    per_step = np.full(T, -np.inf)
    x = init(p, M, cov, rng)
    S = x.shape[1]
    mean = np.zeros((T if moments else 0, S))
    var = np.zeros((T if moments else 0, S))
    w = np.full(M, 1.0 / M)
    for t in range(T):
        if t > 0:
            u = rng.random(M)
            x = _gather(x, _resample_indices(w, u, scheme))
        x = trans(x, t, p, y, cov, rng)
        lw = obs(x, t, p, y, cov)
        ll, w, status = _normalise(lw)
        if status != _OK:
            return per_step, status, t, mean, var
        per_step[t] = ll
        if moments:
            _accumulate_moments(x, w, mean, var, t)
    return per_step, _OK, -1, mean, var


def _apf_loop(init, trans, obs, point, p, y, cov, log_phi, eps, M, scheme, rng, moments):
    T = y.shape[0]
    per_step = np.full(T, -np.inf)
    x = init(p, M, cov, rng)
    S = x.shape[1]
    mean = np.zeros((T if moments else 0, S))
    var = np.zeros((T if moments else 0, S))
    log_pi = np.full(M, -math.log(M))
    log_eps = math.log(eps) if eps > 0 else -np.inf
    log_1m_eps = math.log1p(-eps) if eps < 1 else -np.inf
    for t in range(T):
        z = point(x, t, p, y, cov)
        lg = obs(z, t, p, y, cov)
        if eps > 0:
            a = log_eps + log_phi[t]
            for k in range(M):
                b = log_1m_eps + lg[k]
                hi = max(a, b)
                lo = min(a, b)
                lg[k] = hi + math.log1p(math.exp(lo - hi)) if lo > -np.inf else hi
        lf = lg + log_pi
        first, masses, status = _normalise(lf)
        if status != _OK:
            return per_step, status, t, mean, var
        # _normalise returns the log *mean*; the first-stage factor is the sum
        first += math.log(M)
        u = rng.random(M)
        idx = _resample_indices(masses, u, scheme)
        x = trans(_gather(x, idx), t, p, y, cov, rng)
        lp = obs(x, t, p, y, cov)
        lw = np.empty(M)
        for k in range(M):
            lw[k] = lp[k] - lg[idx[k]]
        second, w, status = _normalise(lw)
        if status != _OK:
            return per_step, status, t, mean, var
        per_step[t] = first + second
        for k in range(M):
            log_pi[k] = math.log(w[k]) if w[k] > 0 else -np.inf
        if moments:
            _accumulate_moments(x, w, mean, var, t)
    return per_step, _OK, -1, mean, var


# Not cached: the loops take kernel dispatchers as arguments, which numba's
# on-disk cache cannot pickle reliably once a dispatcher is collected.
_sir_loop_jit = njit(nogil=True)(_sir_loop)
_apf_loop_jit = njit(nogil=True)(_apf_loop)


def _compiled(*kernels) -> bool:
    return all(is_jitted(k) for k in kernels)


def _values(theta) -> dict:
    if isinstance(theta, ParameterVector):
        return theta.as_dict()
    return dict(theta)


def _finish(per_step, status, bad_t, mean, var, moments):
    if status == _NAN:
        raise NumericalFailure(int(bad_t))
    est = LogLikelihoodEstimate(
        per_step=per_step, failed=status == _ALL_ZERO, failed_at=int(bad_t)
    )
    return est, (FilteredMoments(mean, var) if moments else None)


def _prepare(model, theta, y, covariates):
    y = np.ascontiguousarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] < 1:
        raise ValueError("observation series must be one-dimensional with T >= 1")
    if covariates is None or isinstance(covariates, Mapping):
        cov = model.covariate_matrix(covariates, y.shape[0])
    else:
        cov = np.ascontiguousarray(covariates, dtype=float)
    p = np.ascontiguousarray(model.kernel_params(_values(theta), y, cov), dtype=float)
    return p, y, cov


def sir_filter(
    model: StateSpaceModel,
    theta,
    y,
    settings: FilterSettings,
    covariates=None,
    moments: bool = False,
):
    """Bootstrap (SIR) particle filter.

    Returns ``(estimate, moments)``. ``estimate.per_step[t]`` is the log of
    the mean observation density over particles propagated through the
    transition; its exponential is unbiased for ``p(y_t | y_{1:t-1})``.
    ``moments`` holds Rao-Blackwellised filtered means and variances of each
    state component when requested, otherwise ``None``. If every weight is
    zero at some step, ``estimate.failed`` is set and the total is ``-inf``.
    """
    p, y, cov = _prepare(model, theta, y, covariates)
    rng = np.random.Generator(np.random.PCG64(settings.rng_seed))
    kernels = (model.init_kernel, model.transition_kernel, model.obs_kernel)
    loop = _sir_loop_jit if _compiled(*kernels) else _sir_loop
    out = loop(*kernels, p, y, cov, settings.particles, _SCHEMES[settings.resampling], rng, moments)
    return _finish(*out, moments)


def apf_filter(
    model: StateSpaceModel,
    theta,
    y,
    settings: FilterSettings,
    covariates=None,
    moments: bool = False,
    log_bound=None,
):
    """Auxiliary particle filter with an optional defensive first stage.

    The first-stage weight of particle ``k`` is
    ``eps * phi_t + (1 - eps) * p(y_t | z_t^k)`` times its current mass,
    and the second-stage weight divides the observation density by that
    same term. With ``eps > 0`` the model must provide the bound ``phi_t``.
    """
    eps = float(settings.apf_epsilon)
    if model.point_kernel is None:
        raise ConfigurationError(f"{model.name} has no point-estimate kernel for the APF")
    p, y, cov = _prepare(model, theta, y, covariates)
    if log_bound is None:
        log_bound = model.log_bound(y)
    if eps > 0:
        if log_bound is None:
            raise ConfigurationError(
                f"{model.name}: defensive APF (epsilon > 0) needs an observation bound"
            )
        log_bound = np.ascontiguousarray(log_bound, dtype=float)
        if not np.all(np.isfinite(log_bound)):
            bad = int(np.flatnonzero(~np.isfinite(log_bound))[0])
            raise ConfigurationError(
                f"{model.name}: observation density is unbounded at t={bad}"
            )
    else:
        log_bound = np.zeros(y.shape[0])
    rng = np.random.Generator(np.random.PCG64(settings.rng_seed))
    kernels = (model.init_kernel, model.transition_kernel, model.obs_kernel, model.point_kernel)
    loop = _apf_loop_jit if _compiled(*kernels) else _apf_loop
    out = loop(
        *kernels, p, y, cov, log_bound, eps, settings.particles,
        _SCHEMES[settings.resampling], rng, moments,
    )
    return _finish(*out, moments)


def resample(cloud: ParticleCloud, scheme: str, rng) -> np.ndarray:
    """Indices of an equally weighted resample of ``cloud``.

    ``multinomial`` draws i.i.d. indices from the masses; ``stratified``
    draws one index per stratum ``[(k-1)/M, k/M)``.
    """
    if scheme not in _SCHEMES:
        raise ConfigurationError(f"unknown resampling scheme {scheme!r}")
    masses = np.ascontiguousarray(cloud.masses)
    if not np.all(np.isfinite(masses)):
        raise NumericalFailure(-1, "non-finite particle mass")
    u = rng.random(masses.shape[0])
    return _resample_indices(masses, u, _SCHEMES[scheme])


def run_filter(model, theta, y, settings: FilterSettings, kind: str = "sir", covariates=None,
               moments: bool = False):
    if kind == "sir":
        return sir_filter(model, theta, y, settings, covariates, moments)
    if kind == "apf":
        return apf_filter(model, theta, y, settings, covariates, moments)
    raise ConfigurationError(f"unknown filter {kind!r}; expected 'sir' or 'apf'")
