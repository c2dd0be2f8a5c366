"""Two ways of spending several workers on one chain.

Scheme 1 (:func:`averaged_likelihood`) runs ``J`` independent particle
filters for the same parameter and averages their likelihood estimates,
giving an unbiased estimate that is based on ``J M`` particles.

Scheme 2 (:func:`block_imh_sweep`) draws a block of candidates from a
frozen independence proposal, evaluates them concurrently and then runs
the Metropolis-Hastings selection over the block in a fixed order.

All randomness is derived from seeds, never from the order in which the
workers finish, so results do not depend on the physical parallelism.
"""

from __future__ import annotations

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .filters import FilterSettings, LogLikelihoodEstimate, apf_filter, sir_filter
from .priors import ConfigurationError

log = logging.getLogger(__name__)


class SeedCollisionError(ConfigurationError):
    pass


def derive_seed(master: int, *keys: int) -> int:
    """A 64-bit seed that depends only on ``master`` and the integer ``keys``."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


def worker_seeds(seed: int, workers: int) -> list[int]:
    return [derive_seed(seed, w) for w in range(workers)]


def check_distinct(seeds: Sequence[int]):
    if len(set(int(s) for s in seeds)) != len(seeds):
        raise SeedCollisionError("workers were given colliding seeds; their estimates would not be independent")


class WorkerPool:
    """Maps a function over items with ``threads`` threads (serial when 1).

    The numba filter kernels release the GIL, so threads run filters
    concurrently. Results always come back in input order. A map issued
    from inside one of the pool's own tasks runs serially, so nested use
    (evidence draws whose likelihoods are themselves averaged) cannot
    deadlock.
    """

    def __init__(self, workers: int = 1, threads: int = 1):
        if workers < 1 or threads < 1:
            raise ConfigurationError("worker and thread counts must be positive")
        self.workers = int(workers)
        self.threads = int(threads)
        self._executor = None
        self._local = threading.local()

    def map(self, fn: Callable, items: Iterable) -> list:
        items = list(items)
        if self.threads == 1 or len(items) <= 1 or getattr(self._local, "inside", False):
            return [fn(x) for x in items]
        if self._executor is None:
            self._executor = ThreadPoolExecutor(max_workers=self.threads)
        return list(self._executor.map(lambda x: self._task(fn, x), items))

    def _task(self, fn, x):
        self._local.inside = True
        try:
            return fn(x)
        finally:
            self._local.inside = False

    def close(self):
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


_SERIAL = WorkerPool(1, 1)


def combine_estimates(estimates: Sequence[LogLikelihoodEstimate]) -> LogLikelihoodEstimate:
    """Average ``J`` independent likelihood estimates on the natural scale.

    The combined per-step term is ``log Abar_t - log Abar_{t-1}`` where
    ``Abar_t`` is the worker average of the running products
    ``prod_{s<=t} exp(per_step_w[s])``. The terms telescope, so the total is
    the log of the average of the ``J`` unbiased likelihood estimates, and
    the result is unbiased for every ``t``. For ``J = 1`` it reproduces the
    single estimate.
    """
    if len(estimates) == 1:
        return estimates[0]
    cum = np.cumsum(np.vstack([e.per_step for e in estimates]), axis=1)
    log_avg = logsumexp(cum, axis=0) - math.log(len(estimates))
    with np.errstate(invalid="ignore"):
        per_step = np.diff(np.concatenate([[0.0], log_avg]))
    dead = np.isneginf(log_avg)
    per_step[dead] = -np.inf
    failed = bool(dead.any())
    failed_at = int(np.flatnonzero(dead)[0]) if failed else -1
    return LogLikelihoodEstimate(per_step=per_step, failed=failed, failed_at=failed_at)


def averaged_likelihood(
    model,
    theta,
    y,
    settings: FilterSettings,
    seeds: Sequence[int],
    pool: WorkerPool | None = None,
    kind: str = "sir",
    covariates=None,
) -> LogLikelihoodEstimate:
    """Scheme 1: one filter per seed, estimates averaged on the natural scale.

    A worker that raises (for example on a NaN density) makes the whole
    evaluation raise; a worker whose estimate is exactly zero contributes a
    zero to the average.
    """
    if len(seeds) < 1:
        raise ConfigurationError("need at least one worker")
    check_distinct(seeds)
    filt = {"sir": sir_filter, "apf": apf_filter}.get(kind)
    if filt is None:
        raise ConfigurationError(f"unknown filter {kind!r}")

    def one(seed):
        return filt(model, theta, y, settings.with_seed(seed), covariates)[0]

    return combine_estimates((pool or _SERIAL).map(one, seeds))


# ---------------------------------------------------------------------------
# scheme 2


@dataclass(frozen=True)
class Candidate:
    theta: np.ndarray
    log_q: float
    log_prior: float
    loglik: float
    failed: bool = False


def block_imh_sweep(chain, imh, n_candidates: int, target, rng, pool: WorkerPool | None = None):
    """Scheme 2: propose, evaluate and select a block of IMH candidates.

    (a) ``n_candidates`` draws from the proposal frozen at block start are
    evaluated, possibly concurrently, each with the filter seed that
    :func:`pmmh_step` would give the same proposal index. (b) One sequential
    pass applies the independence Metropolis-Hastings rule in candidate
    order using one uniform per candidate, drawn after all candidates. Returns the new chain
    state and the list of ``(theta, loglik, log_prior, accepted)`` iterates;
    adapting the proposal is left to the caller.
    """
    from .kernel import accept_log_prob, evaluate_point, proposal_seed

    n = int(n_candidates)
    thetas = [imh.propose(chain.theta, rng) for _ in range(n)]
    u = rng.random(n)
    log_q = [imh.log_density(th) for th in thetas]
    log_q_cur = imh.log_density(chain.theta)
    first = chain.proposals

    def evaluate(i):
        return evaluate_point(target, thetas[i], proposal_seed(chain.seed, first + i))

    results = (pool or _SERIAL).map(evaluate, range(n))
    iterates = []
    cur = chain
    for i, (lp, ll, failed) in enumerate(results):
        adj = log_q_cur - log_q[i]
        ok = math.log(u[i]) < accept_log_prob(ll, lp, cur.loglik, cur.log_prior, adj)
        if ok:
            cur = cur.moved(thetas[i], ll, lp)
            log_q_cur = log_q[i]
        cur = cur.counted(accepted=ok, failed=failed)
        iterates.append((cur.theta, cur.loglik, cur.log_prior, ok))
    return cur, iterates
