"""Named parameter vectors and the joint log-prior."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping

import numpy as np

from .priors import ConfigurationError, PointMass, Prior


@dataclass(frozen=True)
class Parameter:
    name: str
    value: float
    fixed: bool = False


@dataclass(frozen=True)
class ParameterVector:
    """Ordered model parameters; only the non-fixed entries are sampled.

    ``pack`` and ``unpack`` convert between this object and the dense real
    vector of free values that the samplers work with.
    """

    entries: tuple[Parameter, ...]

    def __post_init__(self):
        names = [p.name for p in self.entries]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate parameter names in {names}")

    @classmethod
    def from_dict(cls, values: Mapping[str, float], fixed: Iterable[str] = ()):
        fixed = set(fixed)
        unknown = fixed - set(values)
        if unknown:
            raise ConfigurationError(f"fixed parameters without values: {sorted(unknown)}")
        return cls(tuple(Parameter(k, float(v), k in fixed) for k, v in values.items()))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.entries)

    @property
    def free_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.entries if not p.fixed)

    @property
    def dim(self) -> int:
        return sum(1 for p in self.entries if not p.fixed)

    def as_dict(self) -> dict[str, float]:
        return {p.name: p.value for p in self.entries}

    def __getitem__(self, name: str) -> float:
        for p in self.entries:
            if p.name == name:
                return p.value
        raise KeyError(name)

    def pack(self) -> np.ndarray:
        return np.array([p.value for p in self.entries if not p.fixed], dtype=float)

    def unpack(self, v) -> "ParameterVector":
        v = np.asarray(v, dtype=float).ravel()
        if v.shape[0] != self.dim:
            raise ValueError(f"expected {self.dim} free values, got {v.shape[0]}")
        it = iter(v)
        return ParameterVector(
            tuple(p if p.fixed else replace(p, value=float(next(it))) for p in self.entries)
        )

    def with_values(self, **values: float) -> "ParameterVector":
        unknown = set(values) - set(self.names)
        if unknown:
            raise KeyError(f"unknown parameters {sorted(unknown)}")
        return ParameterVector(
            tuple(replace(p, value=float(values.get(p.name, p.value))) for p in self.entries)
        )


def unpack(v, template: ParameterVector) -> ParameterVector:
    return template.unpack(v)


def pack(theta: ParameterVector) -> np.ndarray:
    return theta.pack()


def log_prior(theta: ParameterVector, prior: Mapping[str, Prior]) -> float:
    """Sum of independent per-parameter log-densities.

    Fixed parameters contribute nothing unless their prior is a point mass
    at a different value, in which case the result is ``-inf``.
    """
    names = set(theta.names)
    if names != set(prior):
        missing = sorted(names - set(prior))
        extra = sorted(set(prior) - names)
        raise ConfigurationError(
            f"parameter/prior name mismatch: missing priors {missing}, unknown priors {extra}"
        )
    total = 0.0
    for p in theta.entries:
        dist = prior[p.name]
        if p.fixed and not isinstance(dist, PointMass):
            continue
        lp = float(dist.logpdf(p.value))
        if lp == -np.inf:
            return -np.inf
        total += lp
    return total


def free_log_prior(prior: Mapping[str, Prior], template: ParameterVector):
    """Vectorised log-prior over an ``(n, d)`` array of free values."""
    free = template.free_names

    def logp(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros(x.shape[0])
        for i, name in enumerate(free):
            out = out + prior[name].logpdf(x[:, i])
        return out

    return logp
