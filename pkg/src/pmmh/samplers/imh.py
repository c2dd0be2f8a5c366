"""Adaptive independent Metropolis-Hastings proposal built from normal mixtures.

The proposal is a four-term mixture ``q_j = sum_k w_k g_k``:

* ``g1`` estimates the target and is held fixed within a stage,
* ``g2`` is ``g1`` with every covariance multiplied by 10,
* ``g3`` is refitted by EM to the chain history on a schedule,
* ``g4`` is ``g3`` with every covariance multiplied by 20.

Before the first fit of ``g3`` the weights are ``(0.8, 0.2, 0, 0)``, and
``(0.15, 0.05, 0.7, 0.1)`` afterwards. At the start of the second stage
``g1`` is replaced by the last first-stage ``g3``. The number of components
of ``g3`` grows with the ratio of accepted draws to the dimension.
"""

from __future__ import annotations

import logging
import math
from typing import Sequence

import numpy as np

from .mixture import GaussianMixture, MixtureFitError, fit_mixture

log = logging.getLogger(__name__)

EARLY_WEIGHTS = (0.8, 0.2, 0.0, 0.0)
LATE_WEIGHTS = (0.15, 0.05, 0.7, 0.1)
G2_SCALE = 10.0
G4_SCALE = 20.0
DEFAULT_REFITS = (100, 200, 500, 1000, 2000, 3000, 4000, 5000, 6000, 7500)


def growth_components(accepted: int, d: int, base: float = 25.0, cap: int = 6) -> int:
    """``min(cap, 1 + floor(log2(max(1, accepted / (base d)))))``."""
    ratio = max(1.0, accepted / (base * d))
    return int(min(cap, 1 + math.floor(math.log2(ratio))))


class AdaptiveIndependentProposal:
    symmetric = False

    def __init__(
        self,
        g1: GaussianMixture,
        refit_at: Sequence[int] = DEFAULT_REFITS,
        stage2_at: int | None = 1000,
        growth_base: float = 25.0,
        max_components: int = 6,
        em_iter: int = 100,
        ridge: float = 1e-6,
        window: int | None = None,
        seed: int = 0,
    ):
        refit_at = tuple(int(r) for r in refit_at)
        if any(b <= a for a, b in zip(refit_at, refit_at[1:])):
            raise ValueError("refit iterations must be strictly increasing")
        if max_components < 1:
            raise ValueError("max_components must be at least 1")
        self.d = g1.dim
        self.refit_at = refit_at
        self.stage2_at = stage2_at
        self.growth_base = float(growth_base)
        self.max_components = int(max_components)
        self.em_iter = int(em_iter)
        self.ridge = float(ridge)
        self.window = window
        self.seed = int(seed)

        self.g1 = g1
        self.g2 = g1.scaled(G2_SCALE)
        self.g3: GaussianMixture | None = None
        self.g4: GaussianMixture | None = None
        self.stage = 1
        self.accepted = 0
        self.n_refits = 0
        self.history: list[tuple[int, int]] = []
        self._buffer: list[np.ndarray] = []
        self._rebuild()

    # -- proposal -------------------------------------------------------------

    @property
    def j(self) -> int:
        """Number of recorded iterates."""
        return len(self._buffer)

    def weights(self) -> tuple[float, float, float, float]:
        return EARLY_WEIGHTS if self.g3 is None else LATE_WEIGHTS

    def _terms(self):
        return [
            (w, g)
            for w, g in zip(self.weights(), (self.g1, self.g2, self.g3, self.g4))
            if w > 0
        ]

    def propose(self, theta_cur, rng) -> np.ndarray:
        """One draw from ``q_j``; ``theta_cur`` is ignored."""
        return self._q.sample(rng)

    def log_density(self, theta):
        return self._q.logpdf(theta)

    def log_q_adjust(self, theta_cur, theta_prop) -> float:
        return self.log_density(theta_cur) - self.log_density(theta_prop)

    def as_mixture(self) -> GaussianMixture:
        """The whole proposal ``sum_k w_k g_k`` as a single mixture."""
        return self._q

    def _rebuild(self):
        w, mu, cov = [], [], []
        for wk, g in self._terms():
            w.extend(wk * g.weights)
            mu.extend(g.means)
            cov.extend(g.covariances)
        w = np.asarray(w)
        self._q = GaussianMixture(w / w.sum(), np.asarray(mu), np.asarray(cov))

    # -- adaptation -----------------------------------------------------------

    def record(self, theta, accepted: bool):
        self._buffer.append(np.array(theta, dtype=float))
        if accepted:
            self.accepted += 1

    def observe(self, theta, accepted: bool):
        """Record an iterate and refit when the schedule says so."""
        self.record(theta, accepted)
        if self.j in self.refit_at:
            self.refit()

    def n_components(self) -> int:
        return growth_components(self.accepted, self.d, self.growth_base, self.max_components)

    def refit(self) -> bool:
        """Refit ``g3``/``g4`` on the iterate history; returns whether it changed."""
        if (
            self.stage == 1
            and self.stage2_at is not None
            and self.j >= self.stage2_at
            and self.g3 is not None
        ):
            self.g1 = self.g3
            self.g2 = self.g1.scaled(G2_SCALE)
            self.stage = 2
            self._rebuild()
        data = np.asarray(self._buffer if self.window is None else self._buffer[-self.window :])
        if data.shape[0] == 0 or np.unique(data, axis=0).shape[0] < self.d + 2:
            log.warning("refit at j=%d skipped: too few distinct iterates", self.j)
            return False
        seed = int(np.random.SeedSequence([self.seed, self.n_refits]).generate_state(1)[0])
        self.n_refits += 1
        try:
            g3 = fit_mixture(data, self.n_components(), seed, self.em_iter, self.ridge)
        except MixtureFitError as exc:
            log.warning("refit at j=%d failed (%s); keeping the previous proposal", self.j, exc)
            return False
        self.g3 = g3
        self.g4 = g3.scaled(G4_SCALE)
        self._rebuild()
        self.history.append((self.j, g3.n_components))
        return True
