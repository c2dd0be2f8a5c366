"""Quick self-checks against the exact oracle, run by ``pmmh verify``.

Each check returns a :class:`Check`; none of them needs data files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import simulate_dataset
from .evidence import estimate_evidence
from .filters import FilterSettings, apf_filter, sir_filter
from .kernel import ChainConfig, run_chain
from .models import build_model
from .oracle import LinearGaussianSsm, kalman_log_joint, kalman_loglik, quadrature_evidence
from .parallel import derive_seed
from .targets import ExactTarget


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _oracle_data(T: int = 50, seed: int = 0):
    model = build_model("linear_gaussian")
    data = simulate_dataset(model, {}, T, seed)
    return model, data.y


def pf_unbiasedness(kind: str = "sir", epsilon: float = 0.0, seeds: int = 200, particles: int = 200) -> Check:
    """Mean of ``exp(loglik_hat - loglik)`` within 3 standard errors of 1."""
    model = build_model("linear_gaussian", min_obs_sd=0.5) if epsilon > 0 else build_model("linear_gaussian")
    y = simulate_dataset(model, {}, 50, 0).y
    v = model.default_values()
    exact = kalman_loglik(LinearGaussianSsm(v["a"], v["q"], v["r"], model.m0, model.p0), y)
    filt = sir_filter if kind == "sir" else apf_filter
    ratios = np.empty(seeds)
    for s in range(seeds):
        est, _ = filt(model, v, y, FilterSettings(particles, "stratified", epsilon, derive_seed(0, 4, s)))
        ratios[s] = math.exp(est.total - exact)
    mean, se = ratios.mean(), ratios.std(ddof=1) / math.sqrt(seeds)
    z = (mean - 1.0) / se
    label = kind if kind == "sir" else f"apf eps={epsilon:g}"
    return Check(f"filter unbiasedness ({label})", abs(z) < 3.0, f"mean ratio {mean:.4f}, se {se:.4f}, z {z:+.2f}")


def _random_states(name, n, rng):
    if name == "negbin":
        return rng.integers(0, 200, (n, 1)).astype(float)
    if name.startswith("sv"):
        return np.column_stack([rng.normal(0.0, 3.0, n), rng.standard_normal(n)])
    return rng.normal(1.0, 3.0, (n, 1))


def observation_bounds(draws: int = 20_000, seed: int = 0) -> Check:
    """Observation densities at random states and parameters never exceed the bound."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    T, n = 20, 50
    for name in ("sv_leverage_outlier", "negbin", "poisson_rw"):
        model = build_model(name)
        priors = model.default_priors()
        y = rng.poisson(5.0, T).astype(float) if model.count_data else rng.standard_normal(T)
        bound = model.log_bound(y)
        cov = np.zeros((T, 0))
        for _ in range(max(1, draws // (T * n))):
            vals = {k: float(d.sample(rng)) for k, d in priors.items()}
            p = model.kernel_params(vals, y, cov)
            x = _random_states(name, n, rng)
            for t in range(T):
                dens = np.asarray(model.obs_kernel(x, t, p, y, cov))
                worst = max(worst, float(np.max(dens - bound[t])))
    return Check("observation density bounds", worst <= 1e-12, f"max log(density / bound) {worst:.3g}")


def evidence_vs_quadrature(iterations: int = 3000, n_q: int = 5000, seed: int = 0) -> Check:
    """Bridge and importance estimates of ``log p(y)`` on the exact one-parameter model."""
    model, y = _oracle_data()
    target = ExactTarget.kalman(model, y)
    v = model.default_values()
    ssm = LinearGaussianSsm(v["a"], v["q"], v["r"], model.m0, model.p0)
    prior_a = target.prior["a"]
    quad = quadrature_evidence(kalman_log_joint(ssm, y, prior_a.logpdf), [(-1.0, 1.0)], n0=65, tol=1e-6)
    cfg = ChainConfig(sampler="imh", iterations=iterations, warmup=500, refit_at=(100, 200, 500, 1000, 2000))
    rec = run_chain(target, cfg, seed)
    ev = estimate_evidence(rec, target, seed, n_q=n_q)
    err = max(abs(ev.log_p_bs - quad), abs(ev.log_p_is - quad))
    return Check(
        "evidence vs quadrature",
        err < 0.05,
        f"quadrature {quad:.4f}, bridge {ev.log_p_bs:.4f}, importance {ev.log_p_is:.4f}",
    )


def run_all(quick: bool = False) -> list[Check]:
    seeds = 100 if quick else 300
    return [
        pf_unbiasedness("sir", 0.0, seeds),
        pf_unbiasedness("apf", 0.0, seeds),
        pf_unbiasedness("apf", 0.05, seeds),
        observation_bounds(5_000 if quick else 50_000),
        evidence_vs_quadrature(2000 if quick else 4000, 3000 if quick else 10_000),
    ]
