"""Particle marginal Metropolis-Hastings.

The chain state keeps the likelihood estimate obtained when the current
point was accepted and never recomputes it; together with a fresh filter
seed for every proposal this makes the chain target the joint posterior of
the parameters and the filter's random numbers, whose parameter marginal is
the exact posterior.

Every random quantity is reproducible from a single master seed:

* the chain generator draws proposals and acceptance uniforms, in that
  order for each proposal;
* the filter for proposal ``i`` is seeded with ``derive_seed(chain seed, 0, i)``,
  so it does not matter where or in which order candidates are evaluated.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .filters import NumericalFailure
from .parallel import WorkerPool, derive_seed
from .priors import ConfigurationError
from .samplers.imh import DEFAULT_REFITS, AdaptiveIndependentProposal
from .samplers.mixture import GaussianMixture
from .samplers.rwm import AdaptiveRandomWalk
from .targets import Target

log = logging.getLogger(__name__)

PROPOSAL_STREAM = 0
INIT_STREAM = 1
EVIDENCE_STREAM = 2


@dataclass(frozen=True)
class ChainState:
    theta: np.ndarray
    loglik: float
    log_prior: float
    seed: int
    iteration: int = 0
    accepted: int = 0
    proposals: int = 0
    failures: int = 0

    def moved(self, theta, loglik: float, log_prior: float) -> "ChainState":
        return replace(self, theta=np.asarray(theta, dtype=float), loglik=float(loglik), log_prior=float(log_prior))

    def counted(self, accepted: bool, failed: bool = False) -> "ChainState":
        return replace(
            self,
            iteration=self.iteration + 1,
            accepted=self.accepted + int(accepted),
            proposals=self.proposals + 1,
            failures=self.failures + int(failed),
        )


@dataclass(frozen=True)
class StepInfo:
    proposal: np.ndarray
    loglik: float
    log_prior: float
    accept_prob: float
    accepted: bool
    failed: bool


def accept_log_prob(loglik_p, log_prior_p, loglik_c, log_prior_c, log_q_adjust=0.0) -> float:
    """``log min{1, exp(l_p + pi_p - l_c - pi_c + adj)}``; ``-inf`` for invalid proposals."""
    if not (np.isfinite(loglik_p) and np.isfinite(log_prior_p)):
        return -math.inf
    r = loglik_p + log_prior_p - loglik_c - log_prior_c + log_q_adjust
    if math.isnan(r):
        return -math.inf
    return min(0.0, r)


def proposal_seed(chain_seed: int, index: int) -> int:
    return derive_seed(chain_seed, PROPOSAL_STREAM, index)


def evaluate_point(target: Target, theta, seed: int):
    """``(log_prior, loglik, failed)``; the filter is skipped outside the prior support."""
    lp = target.log_prior(theta)
    if lp == -math.inf:
        return lp, -math.inf, False
    try:
        ll = target.log_likelihood(theta, seed)
    except NumericalFailure as exc:
        log.warning("likelihood evaluation failed (%s); proposal rejected", exc)
        return lp, -math.inf, True
    if math.isnan(ll):
        log.warning("likelihood evaluation returned NaN; proposal rejected")
        return lp, -math.inf, True
    return lp, ll, False


def pmmh_step(chain: ChainState, proposal, target: Target, rng):
    """One Metropolis-Hastings step with an estimated likelihood.

    ``proposal`` is an :class:`AdaptiveRandomWalk` (symmetric, no proposal
    correction) or an :class:`AdaptiveIndependentProposal` (correction
    ``log q(theta_cur) - log q(theta_prop)``). Adaptation is not performed
    here. Returns the new chain state and a :class:`StepInfo`.
    """
    theta_p = proposal.propose(chain.theta, rng)
    u = rng.random()
    lp, ll, failed = evaluate_point(target, theta_p, proposal_seed(chain.seed, chain.proposals))
    adj = proposal.log_q_adjust(chain.theta, theta_p)
    la = accept_log_prob(ll, lp, chain.loglik, chain.log_prior, adj)
    ok = u < math.exp(la)
    new = chain.moved(theta_p, ll, lp) if ok else chain
    new = new.counted(accepted=ok, failed=failed)
    return new, StepInfo(theta_p, ll, lp, math.exp(la), ok, failed)


# ---------------------------------------------------------------------------
# full runs


@dataclass(frozen=True)
class ChainConfig:
    """Sampler settings for :func:`run_chain`.

    ``block_sizes`` switches the independence sampler to the blocked
    parallel scheme: block ``b`` holds ``block_sizes[b] * block_workers``
    candidates, the proposal is refitted after every block and the last size
    repeats once the list is exhausted.
    """

    sampler: str = "imh"
    iterations: int = 10_000
    j0: int = 500
    sigma1: Sequence | None = None
    kappas: Sequence[float] | None = None
    warmup: int = 2000
    refit_at: Sequence[int] = DEFAULT_REFITS
    stage2_at: int | None = 1000
    growth_base: float = 25.0
    max_components: int = 6
    em_iter: int = 100
    ridge: float = 1e-6
    refit_window: int | None = None
    block_sizes: Sequence[int] | None = None
    block_workers: int = 8
    initial: str | Mapping[str, float] = "prior"
    init_tries: int = 100
    progress_every: int = 0

    def __post_init__(self):
        if self.sampler not in ("rwm3c", "imh"):
            raise ConfigurationError(f"unknown sampler {self.sampler!r}; expected 'rwm3c' or 'imh'")
        if self.iterations < 0 or self.warmup < 0 or self.j0 < 0:
            raise ConfigurationError("iterations, warmup and j0 must be nonnegative")
        r = list(self.refit_at)
        if any(b <= a for a, b in zip(r, r[1:])) or any(x <= 0 for x in r):
            raise ConfigurationError("refit iterations must be positive and strictly increasing")
        if self.block_sizes is not None:
            if self.sampler != "imh":
                raise ConfigurationError("blocked parallel sampling needs the independence sampler")
            if not self.block_sizes or any(int(k) < 1 for k in self.block_sizes):
                raise ConfigurationError("block sizes must be positive")
            if self.block_workers < 1:
                raise ConfigurationError("block_workers must be positive")
        if isinstance(self.initial, str) and self.initial not in ("prior", "defaults"):
            raise ConfigurationError("initial must be 'prior', 'defaults' or a mapping of values")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


@dataclass
class RunRecord:
    names: tuple[str, ...]
    draws: np.ndarray
    loglik: np.ndarray
    log_prior: np.ndarray
    accepted: np.ndarray
    seconds: np.ndarray
    sampler: str = ""
    failures: int = 0
    proposal: GaussianMixture | None = None
    components: list = field(default_factory=list)
    warmup: "RunRecord | None" = None

    @classmethod
    def empty(cls, names, sampler=""):
        d = len(names)
        return cls(tuple(names), np.zeros((0, d)), np.zeros(0), np.zeros(0), np.zeros(0, bool), np.zeros(0), sampler)

    @property
    def n(self) -> int:
        return self.draws.shape[0]

    @property
    def acceptance_rate(self) -> float:
        return 100.0 * float(np.mean(self.accepted)) if self.n else float("nan")

    @property
    def time_per_iteration(self) -> float:
        return float(np.mean(self.seconds)) if self.n else 0.0


class _Recorder:
    def __init__(self, n, d):
        self.draws = np.empty((n, d))
        self.loglik = np.empty(n)
        self.log_prior = np.empty(n)
        self.accepted = np.zeros(n, bool)
        self.seconds = np.empty(n)
        self.i = 0

    def add(self, theta, ll, lp, ok, sec):
        i = self.i
        self.draws[i], self.loglik[i], self.log_prior[i] = theta, ll, lp
        self.accepted[i], self.seconds[i] = ok, sec
        self.i += 1

    def record(self, names, sampler, failures, **extra) -> RunRecord:
        return RunRecord(
            tuple(names), self.draws, self.loglik, self.log_prior, self.accepted,
            self.seconds, sampler, failures, **extra,
        )


def _initial_state(target: Target, config: ChainConfig, rng, chain_seed: int) -> ChainState:
    for k in range(max(1, config.init_tries)):
        if isinstance(config.initial, Mapping):
            theta = target.pack(config.initial)
        elif config.initial == "defaults":
            theta = target.template.pack()
        else:
            theta = target.prior_draw(rng)
        lp, ll, _ = evaluate_point(target, theta, derive_seed(chain_seed, INIT_STREAM, k))
        if np.isfinite(lp) and np.isfinite(ll):
            return ChainState(theta, ll, lp, chain_seed)
        if config.initial != "prior":
            break
    raise ConfigurationError("could not find an initial point with finite prior and likelihood")


def _run_rwm(target, chain, config, rng, n, sigma1) -> tuple[ChainState, RunRecord]:
    prop = AdaptiveRandomWalk(sigma1, config.j0, config.kappas)
    rec = _Recorder(n, target.dim)
    for j in range(n):
        t0 = time.perf_counter()
        chain, info = pmmh_step(chain, prop, target, rng)
        prop.observe(chain.theta, info.accepted)
        rec.add(chain.theta, chain.loglik, chain.log_prior, info.accepted, time.perf_counter() - t0)
        _progress(config, "rwm3c", j + 1, n, chain)
    return chain, rec.record(target.names, "rwm3c", chain.failures)


def _progress(config, name, j, n, chain):
    if config.progress_every and j % config.progress_every == 0:
        log.info("%s %d/%d accepted %.1f%% loglik %.3f", name, j, n, 100.0 * chain.accepted / chain.iteration, chain.loglik)


def _sigma1(target, config, theta0):
    if config.sigma1 is None:
        return target.default_sigma1(theta0)
    s = np.asarray(config.sigma1, dtype=float)
    return np.diag(s) if s.ndim == 1 else s


def _g1_from_warmup(target, warm: RunRecord, sigma1, config) -> GaussianMixture:
    tail = warm.draws[warm.n // 2 :]
    mean = tail.mean(axis=0)
    cov = np.atleast_2d(np.cov(tail, rowvar=False)) if tail.shape[0] > 1 else np.zeros((target.dim,) * 2)
    tr = float(np.trace(cov))
    if tr <= 0:
        cov = np.asarray(sigma1, dtype=float) * (0.1**2 / target.dim)
    else:
        cov = cov + config.ridge * tr / target.dim * np.eye(target.dim)
    return GaussianMixture.single(mean, cov)


def _block_schedule(config: ChainConfig):
    sizes = [int(k) for k in config.block_sizes]
    b = 0
    while True:
        yield sizes[min(b, len(sizes) - 1)] * config.block_workers
        b += 1


def run_chain(target: Target, config: ChainConfig, seed: int, pool: WorkerPool | None = None) -> RunRecord:
    """Run the configured sampler; bit-for-bit reproducible from ``seed``.

    The independence sampler starts with ``config.warmup`` iterations of the
    adaptive random walk; ``g1`` is a normal fitted to the second half of
    those draws and the chain starts from their mean.
    """
    if config.iterations == 0:
        return RunRecord.empty(target.names, config.sampler)
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 0)))
    chain_seed = derive_seed(seed, 1)
    chain = _initial_state(target, config, rng, chain_seed)
    sigma1 = _sigma1(target, config, chain.theta)

    if config.sampler == "rwm3c":
        return _run_rwm(target, chain, config, rng, config.iterations, sigma1)[1]

    warm = None
    if config.warmup > 0:
        chain, warm = _run_rwm(target, chain, config, rng, config.warmup, sigma1)
        g1 = _g1_from_warmup(target, warm, sigma1, config)
        start = g1.means[0]
        lp, ll, _ = evaluate_point(target, start, derive_seed(chain_seed, INIT_STREAM, 10**6))
        if np.isfinite(lp) and np.isfinite(ll):
            chain = chain.moved(start, ll, lp)
    else:
        g1 = GaussianMixture.single(chain.theta, sigma1)

    imh = AdaptiveIndependentProposal(
        g1,
        refit_at=config.refit_at if config.block_sizes is None else (),
        stage2_at=config.stage2_at,
        growth_base=config.growth_base,
        max_components=config.max_components,
        em_iter=config.em_iter,
        ridge=config.ridge,
        window=config.refit_window,
        seed=derive_seed(seed, 2),
    )
    n = config.iterations
    rec = _Recorder(n, target.dim)
    if config.block_sizes is None:
        for j in range(n):
            t0 = time.perf_counter()
            chain, info = pmmh_step(chain, imh, target, rng)
            imh.observe(chain.theta, info.accepted)
            rec.add(chain.theta, chain.loglik, chain.log_prior, info.accepted, time.perf_counter() - t0)
            _progress(config, "imh", j + 1, n, chain)
    else:
        from .parallel import block_imh_sweep

        blocks = _block_schedule(config)
        while rec.i < n:
            size = min(next(blocks), n - rec.i)
            t0 = time.perf_counter()
            chain, iterates = block_imh_sweep(chain, imh, size, target, rng, pool)
            per = (time.perf_counter() - t0) / size
            for theta, ll, lp, ok in iterates:
                imh.record(theta, ok)
                rec.add(theta, ll, lp, ok, per)
            imh.refit()
            _progress(config, "imh", rec.i, n, chain)
    return rec.record(
        target.names, "imh", chain.failures,
        proposal=imh.as_mixture(), components=list(imh.history), warmup=warm,
    )
