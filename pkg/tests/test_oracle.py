import math

import numpy as np
import pytest
from scipy import stats

from pmmh.oracle import (
    LinearGaussianSsm,
    QuadratureError,
    kalman_log_joint,
    kalman_loglik,
    quadrature_evidence,
)


def _joint_gaussian_loglik(ssm, y):
    """Assemble the covariance of y_{1:T} directly and evaluate the MVN density."""
    T = len(y)
    # Cov(x_s, x_t) for s <= t: a^(t-s) Var(x_s)
    var = np.empty(T)
    v = ssm.P0
    for t in range(T):
        v = ssm.a**2 * v + ssm.q**2
        var[t] = v
    C = np.empty((T, T))
    for s in range(T):
        for t in range(T):
            lo, hi = min(s, t), max(s, t)
            C[s, t] = ssm.a ** (hi - lo) * var[lo]
    C += ssm.r**2 * np.eye(T)
    mean = ssm.m0 * ssm.a ** np.arange(1, T + 1)
    return stats.multivariate_normal(mean, C).logpdf(y)


def test_matches_brute_force_joint_density():
    ssm = LinearGaussianSsm(0.7, 0.4, 0.6, m0=0.3, P0=2.0)
    y = np.array([0.5, -0.2, 1.1, 0.4, -0.9])
    assert kalman_loglik(ssm, y) == pytest.approx(_joint_gaussian_loglik(ssm, y), abs=1e-10)


def test_vanishing_state_noise_gives_iid_noise():
    ssm = LinearGaussianSsm(0.0, 1e-6, 0.5, m0=0.0, P0=1.0)
    y = np.random.default_rng(0).normal(0.0, 0.5, 40)
    iid = float(np.sum(stats.norm(0.0, 0.5).logpdf(y)))
    assert kalman_loglik(ssm, y) == pytest.approx(iid, abs=1e-3)


def test_single_observation():
    ssm = LinearGaussianSsm(1.0, 0.3, 0.5, m0=0.2, P0=1.5)
    expected = stats.norm(0.2, math.sqrt(1.5 + 0.09 + 0.25)).logpdf(0.7)
    assert kalman_loglik(ssm, [0.7]) == pytest.approx(expected, abs=1e-12)


def test_vectorised_over_a():
    ssm = LinearGaussianSsm(0.0, 0.3, 0.5)
    y = np.random.default_rng(1).normal(size=30)
    a = np.array([-0.5, 0.1, 0.9])
    out = kalman_loglik(ssm, y, a=a)
    for ai, o in zip(a, out):
        assert o == pytest.approx(kalman_loglik(LinearGaussianSsm(ai, 0.3, 0.5), y), abs=1e-12)


def test_deterministic():
    ssm = LinearGaussianSsm(0.9, 0.3, 0.5)
    y = np.linspace(-1, 1, 20)
    assert kalman_loglik(ssm, y) == kalman_loglik(ssm, y)


def test_invalid_model():
    with pytest.raises(ValueError):
        LinearGaussianSsm(0.9, 0.0, 0.5)
    with pytest.raises(ValueError):
        kalman_loglik(LinearGaussianSsm(0.9, 0.3, 0.5), [])


# -- quadrature ----------------------------------------------------------------


def test_single_cell_quadrature():
    f = lambda pts: np.full(len(pts), -3.0)
    assert quadrature_evidence(f, [(0.0, 2.0)], n0=1) == pytest.approx(-3.0 + math.log(2.0))


def test_conjugate_normal_mean():
    # y_i ~ N(theta, 1), theta ~ N(0, 1)
    y = np.array([0.3, 1.2, -0.4, 0.8])
    n = len(y)

    def log_joint(pts):
        th = pts[:, 0]
        return stats.norm(th[:, None], 1.0).logpdf(y[None, :]).sum(axis=1) + stats.norm.logpdf(th)

    exact = stats.multivariate_normal(np.zeros(n), np.eye(n) + np.ones((n, n))).logpdf(y)
    est = quadrature_evidence(log_joint, [(-10.0, 10.0)], tol=1e-8)
    assert est == pytest.approx(exact, abs=1e-6)


def test_two_parameter_box():
    # independent normals integrate to one over a wide box
    f = lambda pts: stats.norm.logpdf(pts[:, 0]) + stats.norm(1.0, 0.5).logpdf(pts[:, 1])
    assert quadrature_evidence(f, [(-9, 9), (-4, 6)], tol=1e-7) == pytest.approx(0.0, abs=1e-6)


def test_refinement_contract(oracle_model, oracle_data):
    v = oracle_model.default_values()
    ssm = LinearGaussianSsm(v["a"], v["q"], v["r"], oracle_model.m0, oracle_model.p0)
    f = kalman_log_joint(ssm, oracle_data, lambda a: np.full(a.shape, -math.log(2.0)))
    coarse = quadrature_evidence(f, [(-1.0, 1.0)], n0=65, tol=1e-4)
    fine = quadrature_evidence(f, [(-1.0, 1.0)], n0=257, tol=1e-6)
    assert abs(coarse - fine) < 1e-4


def test_non_convergence_reported():
    rough = lambda pts: np.sin(1e4 * pts[:, 0]) * 50
    with pytest.raises(QuadratureError, match="did not converge"):
        quadrature_evidence(rough, [(0.0, 1.0)], n0=5, max_refine=2)


def test_too_many_dimensions():
    with pytest.raises(ValueError):
        quadrature_evidence(lambda p: np.zeros(len(p)), [(0, 1)] * 3)
