"""Prior distributions for model parameters.

Every prior is a small frozen dataclass with ``logpdf``, ``sample`` and
``in_support``. ``logpdf`` returns ``-inf`` outside the support so that
out-of-support proposals are rejected by the Metropolis-Hastings ratio.

Parameterisation follows the conventions used throughout the package:

* ``Normal(mean, sd)``
* ``TruncNormal(loc, scale, lo, hi)``: normal restricted to ``(lo, hi)``,
  normalising constant included.
* ``InverseGamma(shape, scale)``: density ``b^a / Gamma(a) x^(-a-1) exp(-b/x)``,
  mode ``b / (a + 1)``.
* ``HalfNormal(scale)``: ``|N(0, scale^2)|``.
* ``Uniform(lo, hi)``
* ``PointMass(value)``: used for parameters held fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy import special, stats

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class ConfigurationError(ValueError):
    """Raised when model, prior or run configuration is inconsistent."""


@dataclass(frozen=True)
class Normal:
    mean: float
    sd: float

    def __post_init__(self):
        if not self.sd > 0:
            raise ConfigurationError(f"normal sd must be positive, got {self.sd}")

    def in_support(self, x):
        return np.isfinite(x)

    def logpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.sd
        return -0.5 * z * z - math.log(self.sd) - _LOG_SQRT_2PI

    def sample(self, rng, size=None):
        return rng.normal(self.mean, self.sd, size)

    @property
    def variance(self):
        return self.sd**2


@dataclass(frozen=True)
class TruncNormal:
    loc: float
    scale: float
    lo: float
    hi: float

    def __post_init__(self):
        if not self.scale > 0 or not self.lo < self.hi:
            raise ConfigurationError(f"invalid truncated normal {self}")

    @property
    def _frozen(self):
        a = (self.lo - self.loc) / self.scale
        b = (self.hi - self.loc) / self.scale
        return stats.truncnorm(a, b, loc=self.loc, scale=self.scale)

    @property
    def _log_mass(self):
        a = (self.lo - self.loc) / self.scale
        b = (self.hi - self.loc) / self.scale
        # log(Phi(b) - Phi(a)) without cancellation in either tail
        if a > 0:
            return _log_diff(special.log_ndtr(-a), special.log_ndtr(-b))
        return _log_diff(special.log_ndtr(b), special.log_ndtr(a))

    def in_support(self, x):
        x = np.asarray(x, dtype=float)
        return (x > self.lo) & (x < self.hi)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x - self.loc) / self.scale
        out = -0.5 * z * z - math.log(self.scale) - _LOG_SQRT_2PI - self._log_mass
        return np.where(self.in_support(x), out, -np.inf)

    def sample(self, rng, size=None):
        return self._frozen.rvs(size=size, random_state=rng)

    @property
    def variance(self):
        a = (self.lo - self.loc) / self.scale
        b = (self.hi - self.loc) / self.scale
        if b - a < 1e-4:
            # the density is flat to within 1e-8 over the interval
            return (self.hi - self.lo) ** 2 / 12.0
        return float(self._frozen.var())


@dataclass(frozen=True)
class InverseGamma:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ConfigurationError(f"invalid inverse gamma {self}")

    def in_support(self, x):
        x = np.asarray(x, dtype=float)
        return (x > 0) & np.isfinite(x)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.shape, self.scale
        with np.errstate(divide="ignore", invalid="ignore"):
            out = a * math.log(b) - special.gammaln(a) - (a + 1.0) * np.log(x) - b / x
        return np.where(self.in_support(x), out, -np.inf)

    def sample(self, rng, size=None):
        return self.scale / rng.gamma(self.shape, 1.0, size)

    @property
    def mode(self):
        return self.scale / (self.shape + 1.0)

    @property
    def variance(self):
        a, b = self.shape, self.scale
        if a <= 2:
            return math.inf
        return b * b / ((a - 1.0) ** 2 * (a - 2.0))


@dataclass(frozen=True)
class HalfNormal:
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ConfigurationError(f"half-normal scale must be positive, got {self.scale}")

    def in_support(self, x):
        x = np.asarray(x, dtype=float)
        return (x > 0) & np.isfinite(x)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        z = x / self.scale
        out = math.log(2.0) - 0.5 * z * z - math.log(self.scale) - _LOG_SQRT_2PI
        return np.where(self.in_support(x), out, -np.inf)

    def sample(self, rng, size=None):
        return np.abs(rng.normal(0.0, self.scale, size))

    @property
    def variance(self):
        return self.scale**2 * (1.0 - 2.0 / math.pi)


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigurationError(f"invalid uniform bounds {self}")

    def in_support(self, x):
        x = np.asarray(x, dtype=float)
        return (x >= self.lo) & (x <= self.hi)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(self.in_support(x), -math.log(self.hi - self.lo), -np.inf)

    def sample(self, rng, size=None):
        return rng.uniform(self.lo, self.hi, size)

    @property
    def variance(self):
        return (self.hi - self.lo) ** 2 / 12.0


@dataclass(frozen=True)
class PointMass:
    value: float

    def in_support(self, x):
        return np.asarray(x, dtype=float) == self.value

    def logpdf(self, x):
        return np.where(self.in_support(x), 0.0, -np.inf)

    def sample(self, rng, size=None):
        if size is None:
            return float(self.value)
        return np.full(size, float(self.value))

    @property
    def variance(self):
        return 0.0


Prior = Normal | TruncNormal | InverseGamma | HalfNormal | Uniform | PointMass

_FACTORIES = {
    "normal": Normal,
    "truncnormal": TruncNormal,
    "invgamma": InverseGamma,
    "halfnormal": HalfNormal,
    "uniform": Uniform,
    "pointmass": PointMass,
}


def _log_diff(log_a, log_b):
    """log(exp(log_a) - exp(log_b)) for log_a >= log_b."""
    return log_a + math.log1p(-math.exp(log_b - log_a))


def prior_from_spec(spec) -> Prior:
    """Build a prior from a config entry such as ``{"normal": [0, 10]}``."""
    if isinstance(spec, (Normal, TruncNormal, InverseGamma, HalfNormal, Uniform, PointMass)):
        return spec
    if not isinstance(spec, Mapping) or len(spec) != 1:
        raise ConfigurationError(f"prior must be a single-key mapping, got {spec!r}")
    (kind, args), = spec.items()
    try:
        factory = _FACTORIES[kind.lower()]
    except KeyError:
        raise ConfigurationError(
            f"unknown prior {kind!r}; expected one of {sorted(_FACTORIES)}"
        ) from None
    if isinstance(args, Mapping):
        return factory(**{k: float(v) for k, v in args.items()})
    if not isinstance(args, (list, tuple)):
        args = [args]
    return factory(*(float(a) for a in args))


def prior_to_spec(prior: Prior) -> dict:
    name = {v: k for k, v in _FACTORIES.items()}[type(prior)]
    return {name: [float(v) for v in prior.__dict__.values()]}
