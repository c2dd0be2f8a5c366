import math

import numpy as np
import pytest
from scipy import stats

from pmmh.filters import FilterSettings, LogLikelihoodEstimate, NumericalFailure, sir_filter
from pmmh.kernel import ChainConfig, ChainState, _block_schedule, pmmh_step, run_chain
from pmmh.parallel import (
    SeedCollisionError,
    WorkerPool,
    averaged_likelihood,
    block_imh_sweep,
    combine_estimates,
    derive_seed,
    worker_seeds,
)
from pmmh.params import ParameterVector
from pmmh.priors import Normal
from pmmh.samplers import AdaptiveIndependentProposal, GaussianMixture
from pmmh.targets import ExactTarget, ParticleTarget


def gaussian_toy():
    """Exact 1-d target: N(1, 0.5^2) likelihood with a N(0, 10^2) prior."""
    template = ParameterVector.from_dict({"x": 0.0})
    return ExactTarget(lambda v: -0.5 * (v["x"] - 1.0) ** 2 / 0.25, template, {"x": Normal(0.0, 10.0)})


def toy_posterior():
    prec = 1 / 0.25 + 1 / 100.0
    return stats.norm((1.0 / 0.25) / prec, math.sqrt(1 / prec))


def test_derive_seed_is_a_pure_function():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert len({derive_seed(1, k) for k in range(1000)}) == 1000
    assert derive_seed(1, 2) != derive_seed(2, 1)


def test_one_worker_is_a_single_filter(oracle_model, oracle_data):
    v = oracle_model.default_values()
    s = FilterSettings(100)
    seeds = worker_seeds(77, 1)
    a = averaged_likelihood(oracle_model, v, oracle_data, s, seeds)
    b, _ = sir_filter(oracle_model, v, oracle_data, s.with_seed(seeds[0]))
    np.testing.assert_array_equal(a.per_step, b.per_step)


def test_colliding_seeds_rejected(oracle_model, oracle_data):
    with pytest.raises(SeedCollisionError):
        averaged_likelihood(oracle_model, oracle_model.default_values(), oracle_data, FilterSettings(10), [5, 5, 6])


def test_combined_total_is_log_mean_of_totals(rng):
    ests = [LogLikelihoodEstimate(rng.normal(-1, 0.3, 20)) for _ in range(4)]
    comb = combine_estimates(ests)
    expected = math.log(np.mean([math.exp(e.total) for e in ests]))
    assert comb.total == pytest.approx(expected, abs=1e-10)


def test_combined_with_a_dead_worker(rng):
    alive = LogLikelihoodEstimate(np.array([-1.0, -2.0]))
    dead = LogLikelihoodEstimate(np.array([-1.0, -np.inf]), failed=True, failed_at=1)
    comb = combine_estimates([alive, dead])
    assert comb.total == pytest.approx(-3.0 - math.log(2.0))
    assert not comb.failed
    both = combine_estimates([dead, dead])
    assert both.failed and both.failed_at == 1 and both.total == -np.inf


def test_worker_failure_fails_the_evaluation(oracle_model, oracle_data):
    class Broken(type(oracle_model)):
        @staticmethod
        def obs_kernel(x, t, p, y, cov):
            return np.full(x.shape[0], np.nan)

    with pytest.raises(NumericalFailure):
        averaged_likelihood(Broken(), oracle_model.default_values(), oracle_data, FilterSettings(10), [1, 2, 3])


def test_threads_do_not_change_results(oracle_model, oracle_data):
    v = oracle_model.default_values()
    seeds = worker_seeds(3, 8)
    serial = averaged_likelihood(oracle_model, v, oracle_data, FilterSettings(100), seeds)
    with WorkerPool(8, threads=4) as pool:
        threaded = averaged_likelihood(oracle_model, v, oracle_data, FilterSettings(100), seeds, pool)
    np.testing.assert_array_equal(serial.per_step, threaded.per_step)


def test_averaging_unbiased(oracle_model, oracle_data, oracle_exact):
    v = oracle_model.default_values()
    n = 500
    r = np.array([
        math.exp(averaged_likelihood(oracle_model, v, oracle_data, FilterSettings(100), worker_seeds(derive_seed(8, s), 4)).total - oracle_exact)
        for s in range(n)
    ])
    assert abs(r.mean() - 1.0) < 3.0 * r.std(ddof=1) / math.sqrt(n)


def test_eight_workers_match_one_big_filter(oracle_model, oracle_data):
    v = oracle_model.default_values()
    n = 200
    avg = [averaged_likelihood(oracle_model, v, oracle_data, FilterSettings(100, "multinomial"), worker_seeds(derive_seed(9, s), 8)).total
           for s in range(n)]
    big = [sir_filter(oracle_model, v, oracle_data, FilterSettings(800, "multinomial", rng_seed=derive_seed(10, s)))[0].total
           for s in range(n)]
    ratio = np.var(avg, ddof=1) / np.var(big, ddof=1)
    assert 1 / 1.5 < ratio < 1.5


# -- blocked independence sampling -------------------------------------------


def _imh(mean=0.0, var=1.0):
    return AdaptiveIndependentProposal(GaussianMixture.single([mean], [[var]]), refit_at=())


def test_block_of_one_equals_sequential_step():
    target = gaussian_toy()
    chain = ChainState(np.array([0.5]), target.log_likelihood([0.5]), target.log_prior([0.5]), seed=11)
    imh = _imh(1.0, 0.5)
    a, it = block_imh_sweep(chain, imh, 1, target, np.random.default_rng(4))
    b, info = pmmh_step(chain, imh, target, np.random.default_rng(4))
    np.testing.assert_array_equal(a.theta, b.theta)
    assert it[0][3] == info.accepted and a.loglik == b.loglik


def test_identical_candidates_all_accepted():
    template = ParameterVector.from_dict({"x": 0.0})
    target = ExactTarget(lambda v: -1.0, template, {"x": Normal(0.0, 1.0)})

    class Same(AdaptiveIndependentProposal):
        def propose(self, theta, rng):
            return np.array([0.3])

    imh = Same(GaussianMixture.single([0.0], [[1.0]]), refit_at=())
    chain = ChainState(np.array([0.3]), -1.0, target.log_prior([0.3]), seed=1)
    new, its = block_imh_sweep(chain, imh, 40, target, np.random.default_rng(0))
    assert all(ok for *_, ok in its)
    assert new.theta[0] == 0.3 and new.accepted == 40


def test_block_schedule_bookkeeping():
    cfg = ChainConfig(block_sizes=(15, 25, 60, 125), block_workers=8)
    sched = _block_schedule(cfg)
    assert [next(sched) for _ in range(6)] == [120, 200, 480, 1000, 1000, 1000]


def test_blocked_run_is_deterministic_across_threads(oracle_model, oracle_data):
    target = ParticleTarget(oracle_model, oracle_data, settings=FilterSettings(50))
    cfg = ChainConfig(iterations=600, warmup=200, block_sizes=(5, 10), block_workers=8)
    a = run_chain(target, cfg, seed=1)
    with WorkerPool(8, threads=4) as pool:
        b = run_chain(target, cfg, seed=1, pool=pool)
    np.testing.assert_array_equal(a.draws, b.draws)
    np.testing.assert_array_equal(a.loglik, b.loglik)
    assert [h[0] for h in a.components] == [40, 120, 200, 280, 360, 440, 520, 600]


@pytest.mark.slow
def test_blocked_and_sequential_marginals_agree():
    target = gaussian_toy()
    seq = run_chain(target, ChainConfig(iterations=100_000, warmup=500), seed=1).draws[:, 0]
    blk = run_chain(
        target, ChainConfig(iterations=100_000, warmup=500, block_sizes=(15, 25, 60, 125), block_workers=8), seed=2
    ).draws[:, 0]
    # thin so the Kolmogorov-Smirnov independence assumption roughly holds
    assert stats.ks_2samp(seq[::5], blk[::5]).pvalue > 0.01
    assert stats.kstest(blk[::5], toy_posterior().cdf).pvalue > 0.01


def test_nested_maps_do_not_deadlock():
    with WorkerPool(4, threads=2) as pool:
        out = pool.map(lambda i: sum(pool.map(lambda j: i * j, range(5))), range(6))
    assert out == [10 * i for i in range(6)]
