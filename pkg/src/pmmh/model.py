"""State-space model abstraction.

A model is described by four kernels working on a particle array ``x`` of
shape ``(M, state_dim)``:

``init(p, M, cov, rng)``
    draw ``M`` initial states ``x_0``.
``transition(x, t, p, y, cov, rng)``
    propagate states from time ``t - 1`` to time ``t`` (0-based index into
    ``y``). Observations strictly before ``t`` may be used, which is how
    leverage effects enter.
``obs(x, t, p, y, cov)``
    log observation density ``log p(y[t] | x_t)`` per particle.
``point(x, t, p, y, cov)``
    point estimate ``z_t`` of the next state for each particle, used by the
    auxiliary particle filter.

``p`` is a flat float array built by :meth:`StateSpaceModel.kernel_params`
from named parameter values, and ``cov`` is a ``(T, k)`` covariate array.
Kernels compiled with numba are run inside a compiled filter loop; plain
Python/numpy kernels also work, through the same loop in interpreted mode.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .params import ParameterVector
from .priors import ConfigurationError, Prior


class StateSpaceModel:
    name: str = "model"
    state_dim: int = 1
    count_data: bool = False
    covariate_names: tuple[str, ...] = ()

    init_kernel = None
    transition_kernel = None
    obs_kernel = None
    point_kernel = None

    # -- parameters -----------------------------------------------------

    def parameter_names(self) -> tuple[str, ...]:
        raise NotImplementedError

    def default_priors(self) -> dict[str, Prior]:
        raise NotImplementedError

    def default_values(self) -> dict[str, float]:
        raise NotImplementedError

    def default_fixed(self) -> tuple[str, ...]:
        return ()

    def parameter_vector(self, values: Mapping[str, float] | None = None, fixed=None):
        vals = self.default_values()
        if values:
            unknown = set(values) - set(vals)
            if unknown:
                raise ConfigurationError(
                    f"{self.name}: unknown parameters {sorted(unknown)}"
                )
            vals.update({k: float(v) for k, v in values.items()})
        fixed = self.default_fixed() if fixed is None else tuple(fixed)
        return ParameterVector.from_dict(vals, fixed)

    def kernel_params(self, values: Mapping[str, float], y, cov) -> np.ndarray:
        raise NotImplementedError

    # -- data -------------------------------------------------------------

    def covariate_matrix(self, covariates: Mapping[str, Sequence[float]] | None, T: int):
        covariates = covariates or {}
        missing = [c for c in self.covariate_names if c not in covariates]
        if missing:
            raise ConfigurationError(f"{self.name}: missing covariate columns {missing}")
        if not self.covariate_names:
            return np.zeros((T, 0))
        cols = [np.asarray(covariates[c], dtype=float) for c in self.covariate_names]
        for c, col in zip(self.covariate_names, cols):
            if col.shape != (T,):
                raise ConfigurationError(f"covariate {c!r} has length {col.shape}, expected {T}")
        return np.column_stack(cols)

    # -- observation density bound --------------------------------------------

    def log_bound(self, y) -> np.ndarray | None:
        """``log phi_t`` with ``p(y_t | x_t; theta) <= phi_t`` for all states and
        parameters, or ``None`` when no such bound is available."""
        return None

    # -- simulation ---------------------------------------------------------

    def obs_sample(self, x, t, p, cov, rng) -> np.ndarray:
        raise NotImplementedError

    def simulate(self, values: Mapping[str, float], T: int, rng, covariates=None):
        """Forward-simulate ``(y, states)``; ``states[0]`` is ``x_0``."""
        values = {**self.default_values(), **values}
        cov = self.covariate_matrix(covariates, T)
        y = np.zeros(T)
        p = self.kernel_params(values, y, cov)
        x = np.asarray(self.init_kernel(p, 1, cov, rng))
        states = np.empty((T + 1, self.state_dim))
        states[0] = x[0]
        for t in range(T):
            x = np.asarray(self.transition_kernel(x, t, p, y, cov, rng))
            states[t + 1] = x[0]
            y[t] = self.obs_sample(x, t, p, cov, rng)[0]
        return y, states

    # -- convenience ---------------------------------------------------------

    def obs_logdensity(self, x, t, values, y, cov=None):
        y = np.asarray(y, dtype=float)
        cov = np.zeros((y.shape[0], 0)) if cov is None else cov
        p = self.kernel_params(values, y, cov)
        x = np.asarray(x, dtype=float).reshape(-1, self.state_dim)
        return np.asarray(self.obs_kernel(x, t, p, y, cov))

    def describe(self) -> dict:
        return {"model": self.name}


ModelDefinition = StateSpaceModel
