"""Exact reference computations for checking the Monte Carlo estimators.

* :func:`kalman_loglik` evaluates the likelihood of the scalar AR(1) plus
  noise model by the prediction-error decomposition.
* :func:`quadrature_evidence` integrates ``exp(log-likelihood + log-prior)``
  over a box of at most two parameters by trapezoid rules on a grid that is
  refined until the result stops moving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinearGaussianSsm:
    """``x_0 ~ N(m0, P0)``, ``x_t = a x_{t-1} + q eta_t``, ``y_t = x_t + r eps_t``."""

    a: float
    q: float
    r: float
    m0: float = 0.0
    P0: float = 1.0

    def __post_init__(self):
        if not (self.q > 0 and self.r > 0 and self.P0 > 0):
            raise ValueError("q, r and P0 must be positive")


def kalman_loglik(model: LinearGaussianSsm, y, *, a=None) -> float | np.ndarray:
    """Exact log-likelihood ``sum_t log N(y_t; E[y_t | y_{1:t-1}], S_t)``.

    ``a`` may be an array of autoregressive coefficients, in which case the
    filter runs for all of them at once and an array is returned.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] < 1:
        raise ValueError("need T >= 1 observations")
    coef = np.asarray(model.a if a is None else a, dtype=float)
    q2, r2 = model.q**2, model.r**2
    if coef.ndim == 0:
        return _kalman_scalar(float(coef), q2, r2, model.m0, model.P0, y.tolist())
    m = np.full(coef.shape, model.m0)
    P = np.full(coef.shape, model.P0)
    ll = np.zeros(coef.shape)
    for yt in y:
        m = coef * m
        P = coef * coef * P + q2
        S = P + r2
        v = yt - m
        ll -= 0.5 * (math.log(2.0 * math.pi) + np.log(S) + v * v / S)
        K = P / S
        m = m + K * v
        P = (1.0 - K) * P
    return float(ll) if ll.ndim == 0 else ll


def _kalman_scalar(a, q2, r2, m, P, ys):
    ll = 0.0
    c = math.log(2.0 * math.pi)
    for yt in ys:
        m = a * m
        P = a * a * P + q2
        S = P + r2
        v = yt - m
        ll -= 0.5 * (c + math.log(S) + v * v / S)
        K = P / S
        m = m + K * v
        P = (1.0 - K) * P
    return ll


def _trapezoid_weights(n: int, lo: float, hi: float) -> np.ndarray:
    h = (hi - lo) / (n - 1)
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _grid_estimate(log_f, bounds, n):
    axes = [np.linspace(lo, hi, n) for lo, hi in bounds]
    log_w = [np.log(_trapezoid_weights(n, lo, hi)) for lo, hi in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    vals = np.asarray(log_f(pts), dtype=float).reshape(mesh[0].shape)
    lw = log_w[0] if len(bounds) == 1 else log_w[0][:, None] + log_w[1][None, :]
    return float(logsumexp(vals + lw))


def quadrature_evidence(
    log_joint: Callable[[np.ndarray], np.ndarray],
    bounds: Sequence[tuple[float, float]],
    n0: int = 33,
    tol: float = 1e-4,
    max_refine: int = 10,
) -> float:
    """``log`` of the integral of ``exp(log_joint)`` over a box.

    ``log_joint`` receives an ``(n, k)`` array of points (``k`` = 1 or 2)
    and returns log-likelihood plus log-prior at each. The grid starts at
    ``n0`` points per axis and is doubled until two successive estimates
    differ by less than ``tol``. ``n0 = 1`` is a single-cell midpoint rule.
    """
    bounds = [(float(lo), float(hi)) for lo, hi in bounds]
    if not 1 <= len(bounds) <= 2:
        raise ValueError("quadrature oracle supports one or two parameters")
    if n0 == 1:
        mid = np.array([[0.5 * (lo + hi) for lo, hi in bounds]])
        vol = math.prod(hi - lo for lo, hi in bounds)
        return float(np.asarray(log_joint(mid))[0]) + math.log(vol)
    n = max(int(n0), 3)
    prev = _grid_estimate(log_joint, bounds, n)
    diff = math.inf
    for _ in range(max_refine):
        n = 2 * n - 1
        cur = _grid_estimate(log_joint, bounds, n)
        diff = abs(cur - prev)
        if diff < tol:
            return cur
        prev = cur
    raise QuadratureError(f"quadrature did not converge: last change {diff:.3g} > {tol:.3g}")


def kalman_log_joint(model: LinearGaussianSsm, y, log_prior_a: Callable[[np.ndarray], np.ndarray]):
    """Vectorised ``log p(y | a) + log p(a)`` for quadrature over ``a``."""

    def f(pts):
        a = np.asarray(pts)[:, 0]
        lp = np.asarray(log_prior_a(a), dtype=float)
        out = np.full(a.shape, -np.inf)
        ok = np.isfinite(lp)
        if ok.any():
            out[ok] = kalman_loglik(model, y, a=a[ok]) + lp[ok]
        return out

    return f
