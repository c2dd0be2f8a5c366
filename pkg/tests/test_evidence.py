import math

import numpy as np
import pytest
from scipy.special import logsumexp

from pmmh.evidence import EvidenceError, bridge_evidence, default_U, estimate_evidence, importance_evidence
from pmmh.kernel import ChainConfig, run_chain
from pmmh.oracle import LinearGaussianSsm, kalman_log_joint, quadrature_evidence
from pmmh.samplers import GaussianMixture
from pmmh.targets import ExactTarget


# discrete three-point toy: f(theta) = p(y | theta) p(theta) on {0, 1, 2}
F = np.log(np.array([0.02, 0.05, 0.03]))
LOG_PY = float(logsumexp(F))
POST = F - LOG_PY


def test_bridge_exact_when_q_is_posterior(rng):
    idx_post, idx_q = rng.integers(0, 3, 50), rng.integers(0, 3, 70)
    est = bridge_evidence(F[idx_post], POST[idx_post], F[idx_q], POST[idx_q], LOG_PY)
    assert est == pytest.approx(LOG_PY, abs=1e-12)


def test_importance_exact_when_q_is_posterior(rng):
    idx = rng.integers(0, 3, 30)
    assert importance_evidence(F[idx], POST[idx]) == pytest.approx(LOG_PY, abs=1e-12)


def test_importance_with_prior_proposal(rng):
    loglik = rng.normal(-5, 2, 100)
    log_prior = rng.normal(0, 1, 100)
    est = importance_evidence(loglik + log_prior, log_prior)
    assert est == pytest.approx(math.log(np.mean(np.exp(loglik))), abs=1e-10)


def test_default_U_exact_when_q_is_posterior():
    class Discrete:
        def logpdf(self, th):
            return POST[int(round(float(np.asarray(th).ravel()[0])))]

    draws = np.array([[1.0], [1.0]])
    log_U, theta, fallback = default_U(draws, F[[1, 1]], Discrete(), lambda th: F[int(th[0])])
    assert log_U == pytest.approx(LOG_PY) and not fallback


def test_default_U_falls_back_outside_support():
    q = GaussianMixture.single([0.0], [[1.0]])
    draws = np.array([[-1.0], [1.0], [0.5]])
    log_f_post = np.array([-3.0, -1.0, -2.0])
    # the posterior mean (about 0.17) is declared outside the support
    log_f = lambda th: -np.inf if abs(th[0] - draws.mean()) < 1e-12 else -1.0
    log_U, theta, fallback = default_U(draws, log_f_post, q, log_f)
    assert fallback and theta[0] == 1.0
    assert log_U == pytest.approx(-1.0 - q.logpdf(np.array([1.0])))


def test_stable_for_huge_log_ratios(rng):
    for shift in (-600.0, 600.0):
        lf_post, lq_post = rng.normal(shift, 1, 200), rng.normal(0, 1, 200)
        lf_q, lq_q = rng.normal(shift, 1, 300), rng.normal(0, 1, 300)
        bs = bridge_evidence(lf_post, lq_post, lf_q, lq_q, shift)
        is_ = importance_evidence(lf_q, lq_q)
        assert np.isfinite(bs) and np.isfinite(is_)
        assert abs(bs - shift) < 5 and abs(is_ - shift) < 5


def test_underflow_reported():
    with pytest.raises(EvidenceError, match="U"):
        bridge_evidence([0.0], [-np.inf], [0.0], [0.0], 0.0)


def test_empty_inputs():
    with pytest.raises(ValueError):
        bridge_evidence([], [], [0.0], [0.0], 0.0)
    with pytest.raises(ValueError):
        importance_evidence([], [])


@pytest.fixture(scope="module")
def oracle_run(oracle_model, oracle_data):
    target = ExactTarget.kalman(oracle_model, oracle_data)
    v = oracle_model.default_values()
    ssm = LinearGaussianSsm(v["a"], v["q"], v["r"], oracle_model.m0, oracle_model.p0)
    quad = quadrature_evidence(kalman_log_joint(ssm, oracle_data, target.prior["a"].logpdf), [(-1.0, 1.0)], n0=65, tol=1e-6)
    rec = run_chain(target, ChainConfig(iterations=3000, warmup=500, refit_at=(100, 200, 500, 1000, 2000)), seed=0)
    return target, rec, quad


def test_estimates_match_quadrature(oracle_run):
    target, rec, quad = oracle_run
    ev = estimate_evidence(rec, target, seed=1, n_q=5000)
    assert abs(ev.log_p_bs - quad) < 0.05
    assert abs(ev.log_p_is - quad) < 0.05
    assert abs(ev.log_U - quad) < 1.0
    assert ev.n_q == 5000 and ev.n_posterior == 2700


def test_bridge_insensitive_to_U(oracle_run):
    target, rec, quad = oracle_run
    q = rec.proposal
    post = rec.draws[300:]
    lf_post = rec.loglik[300:] + rec.log_prior[300:]
    qd = q.sample(np.random.default_rng(0), 5000)
    lf_q = np.array([target.log_likelihood(t) + target.log_prior(t) for t in qd])
    base = bridge_evidence(lf_post, q.logpdf(post), lf_q, q.logpdf(qd), quad)
    for c in (-2.0, 2.0):
        assert abs(bridge_evidence(lf_post, q.logpdf(post), lf_q, q.logpdf(qd), quad + c) - base) < 0.05


def test_evidence_is_reproducible(oracle_run):
    target, rec, _ = oracle_run
    a = estimate_evidence(rec, target, seed=3, n_q=500)
    b = estimate_evidence(rec, target, seed=3, n_q=500)
    assert a == b


def test_random_walk_run_has_no_proposal(oracle_model, oracle_data):
    target = ExactTarget.kalman(oracle_model, oracle_data)
    rec = run_chain(target, ChainConfig(sampler="rwm3c", iterations=100), seed=0)
    with pytest.raises(ValueError):
        estimate_evidence(rec, target, seed=0)
