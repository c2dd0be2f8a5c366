"""Multivariate normal mixtures and their fitting by EM."""

from __future__ import annotations

import logging
import math
import warnings

import numpy as np
from scipy.linalg import solve_triangular
from sklearn.exceptions import ConvergenceWarning
from sklearn.mixture import GaussianMixture as _SkMixture

log = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)


class MixtureFitError(RuntimeError):
    pass


class GaussianMixture:
    """Finite mixture of multivariate normals ``sum_c w_c N(mean_c, cov_c)``."""

    def __init__(self, weights, means, covariances):
        w = np.asarray(weights, dtype=float).ravel()
        mu = np.atleast_2d(np.asarray(means, dtype=float))
        cov = np.asarray(covariances, dtype=float)
        if cov.ndim == 2:
            cov = cov[None]
        n, d = mu.shape
        if w.shape != (n,) or cov.shape != (n, d, d):
            raise ValueError("weights, means and covariances disagree in shape")
        if np.any(w <= 0) or not np.isclose(w.sum(), 1.0, atol=1e-10):
            raise ValueError("mixture weights must be positive and sum to one")
        self.weights = w / w.sum()
        self.means = mu
        self.covariances = 0.5 * (cov + np.swapaxes(cov, 1, 2))
        try:
            self._chol = np.linalg.cholesky(self.covariances)
        except np.linalg.LinAlgError:
            raise ValueError("mixture covariances must be positive definite") from None
        log_det = 2.0 * np.log(np.diagonal(self._chol, axis1=1, axis2=2)).sum(axis=1)
        self._log_norm = np.log(self.weights) - 0.5 * (d * _LOG_2PI + log_det)
        eye = np.broadcast_to(np.eye(d), self._chol.shape)
        self._inv_chol = np.array([solve_triangular(L, I, lower=True) for L, I in zip(self._chol, eye)])
        self._cum = np.cumsum(self.weights)

    @classmethod
    def single(cls, mean, cov):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        return cls([1.0], mean[None], cov[None])

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    def scaled(self, factor: float) -> "GaussianMixture":
        """Same weights and means, covariances multiplied by ``factor``."""
        return GaussianMixture(self.weights, self.means, self.covariances * factor)

    def component_logpdf(self, x) -> np.ndarray:
        """``(n, C)`` array of ``log w_c + log N(x; mean_c, cov_c)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        diff = x[:, None, :] - self.means[None, :, :]
        z = np.einsum("cij,ncj->nci", self._inv_chol, diff)
        maha = np.einsum("nci,nci->nc", z, z)
        return self._log_norm[None, :] - 0.5 * maha

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        lc = self.component_logpdf(x.reshape(-1, self.dim))
        m = lc.max(axis=1)
        safe = np.where(np.isfinite(m), m, 0.0)
        out = safe + np.log(np.exp(lc - safe[:, None]).sum(axis=1))
        return float(out[0]) if single else out

    def sample(self, rng, size: int | None = None):
        """Draw ``size`` points; the component uniforms come before the normals."""
        n = 1 if size is None else int(size)
        comp = np.searchsorted(self._cum, rng.random(n) * self._cum[-1], side="right")
        comp = np.minimum(comp, self.n_components - 1)
        z = rng.standard_normal((n, self.dim))
        x = self.means[comp] + np.einsum("nij,nj->ni", self._chol[comp], z)
        return x[0] if size is None else x

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianMixture":
        return cls(d["weights"], d["means"], d["covariances"])

    def __repr__(self):
        return f"GaussianMixture(n_components={self.n_components}, dim={self.dim})"


def fit_mixture(
    x,
    n_components: int,
    seed: int,
    max_iter: int = 100,
    ridge: float = 1e-6,
) -> GaussianMixture:
    """Fit a mixture by EM with k-means++ starts.

    A ridge of ``ridge * trace(cov(x)) / d`` is added to every component
    covariance. When EM breaks down (a collapsing component), the fit is
    retried with one component fewer; if even one component fails, a
    :class:`MixtureFitError` is raised.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = x.shape
    if n < d + 2:
        raise MixtureFitError(f"need at least {d + 2} points to fit a {d}-dimensional mixture")
    total_var = float(np.trace(np.atleast_2d(np.cov(x, rowvar=False))))
    if total_var <= 0:
        raise MixtureFitError("all points are identical")
    reg = ridge * total_var / d
    k = max(1, min(int(n_components), n // (d + 1)))
    while k >= 1:
        try:
            return _em(x, k, seed, max_iter, reg)
        except (ValueError, np.linalg.LinAlgError) as exc:
            log.warning("EM with %d components failed (%s); retrying with %d", k, exc, k - 1)
            k -= 1
    raise MixtureFitError("EM failed for every component count")


def _em(x, k, seed, max_iter, reg):
    gm = _SkMixture(
        n_components=k,
        covariance_type="full",
        max_iter=max_iter,
        reg_covar=reg,
        init_params="k-means++",
        random_state=seed,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        gm.fit(x)
    w = gm.weights_
    if np.any(w <= 0) or not np.all(np.isfinite(gm.covariances_)):
        raise ValueError("degenerate component")
    return GaussianMixture(w / w.sum(), gm.means_, gm.covariances_)
