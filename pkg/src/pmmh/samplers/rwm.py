"""Three-component adaptive random walk Metropolis proposal.

    q_j(theta; theta_{j-1}) = w1 N(theta_{j-1}, k1 S1) + w2 N(theta_{j-1}, k2 S2j)
                              + w3 N(theta_{j-1}, k3 S2j)

with ``k1 = 0.1^2/d``, ``k2 = 2.38^2/d``, ``k3 = 25``, ``S1`` fixed and
``S2j`` the sample covariance of the chain iterates so far. Only the first
component is used for ``j <= j0``; afterwards the weights are
``(0.05, 0.90, 0.05)``.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy.special import logsumexp

log = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)
LATE_WEIGHTS = (0.05, 0.90, 0.05)


def default_kappas(d: int) -> tuple[float, float, float]:
    return 0.1**2 / d, 2.38**2 / d, 25.0


def component_weights(j: int, j0: int, late=LATE_WEIGHTS) -> tuple[float, float, float]:
    """Weights used at iteration ``j`` (1-based)."""
    return (1.0, 0.0, 0.0) if j <= j0 else tuple(late)


class RunningMoments:
    """One-pass (Welford) mean and sample covariance."""

    def __init__(self, d: int):
        self.n = 0
        self.mean = np.zeros(d)
        self._m2 = np.zeros((d, d))

    def update(self, x):
        x = np.asarray(x, dtype=float)
        self.n += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.n
        self._m2 += np.outer(delta, x - self.mean)

    @property
    def covariance(self) -> np.ndarray:
        if self.n < 2:
            return np.zeros_like(self._m2)
        c = self._m2 / (self.n - 1)
        return 0.5 * (c + c.T)


class AdaptiveRandomWalk:
    """RWM3C proposal state.

    ``j`` is the index of the iteration about to be proposed, so the
    adapted covariance is always built from the ``j - 1`` recorded iterates.
    """

    symmetric = True

    def __init__(self, sigma1, j0: int = 500, kappas=None, late_weights=LATE_WEIGHTS):
        s1 = np.atleast_2d(np.asarray(sigma1, dtype=float))
        self.d = s1.shape[0]
        if s1.shape != (self.d, self.d):
            raise ValueError("sigma1 must be a square matrix")
        self.sigma1 = 0.5 * (s1 + s1.T)
        self._chol1 = np.linalg.cholesky(self.sigma1)
        self.j0 = int(j0)
        self.kappas = tuple(kappas) if kappas is not None else default_kappas(self.d)
        late = np.asarray(late_weights, dtype=float)
        if late.shape != (3,) or np.any(late < 0) or not np.isclose(late.sum(), 1.0):
            raise ValueError("late_weights must be three nonnegative numbers summing to one")
        self.late_weights = tuple(late)
        self.moments = RunningMoments(self.d)
        self.fallbacks = 0
        self._chol2 = None
        self._chol2_n = -1

    @property
    def j(self) -> int:
        return self.moments.n + 1

    @property
    def sigma2(self) -> np.ndarray:
        return self.moments.covariance

    def weights(self):
        return component_weights(self.j, self.j0, self.late_weights)

    def _adapted_chol(self):
        """Cholesky factor of ``S2j`` or ``None`` when it is unusable."""
        if self._chol2_n != self.moments.n:
            self._chol2_n = self.moments.n
            self._chol2 = None
            if self.moments.n >= self.d + 1:
                try:
                    self._chol2 = np.linalg.cholesky(self.sigma2)
                except np.linalg.LinAlgError:
                    self._chol2 = None
        return self._chol2

    def _effective(self):
        """Weights and factors actually used, after the degenerate fallback."""
        w = self.weights()
        chol2 = self._adapted_chol() if w[0] < 1.0 else None
        if w[0] < 1.0 and chol2 is None:
            return (1.0, 0.0, 0.0), None, True
        return w, chol2, False

    def propose(self, theta, rng) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        w, chol2, fell_back = self._effective()
        u = rng.random()
        z = rng.standard_normal(self.d)
        if fell_back:
            self.fallbacks += 1
            if self.fallbacks == 1:
                log.warning("adapted covariance not positive definite at j=%d; using the fixed component", self.j)
        if u < w[0]:
            return theta + math.sqrt(self.kappas[0]) * (self._chol1 @ z)
        if u < w[0] + w[1]:
            return theta + math.sqrt(self.kappas[1]) * (chol2 @ z)
        return theta + math.sqrt(self.kappas[2]) * (chol2 @ z)

    def log_density(self, theta_new, theta_cur) -> float:
        """``log q_j(theta_new; theta_cur)`` for the current state."""
        diff = np.asarray(theta_new, dtype=float) - np.asarray(theta_cur, dtype=float)
        w, chol2, _ = self._effective()
        terms = []
        for wk, kappa, L in zip(w, self.kappas, (self._chol1, chol2, chol2)):
            if wk <= 0:
                continue
            z = np.linalg.solve(L, diff) / math.sqrt(kappa)
            log_det = 2.0 * np.log(np.diag(L)).sum() + self.d * math.log(kappa)
            terms.append(math.log(wk) - 0.5 * (self.d * _LOG_2PI + log_det + z @ z))
        return float(logsumexp(terms))

    def log_q_adjust(self, theta_cur, theta_prop) -> float:
        return 0.0

    def observe(self, theta, accepted: bool):
        """Record the chain iterate (after the accept/reject decision)."""
        self.moments.update(theta)
