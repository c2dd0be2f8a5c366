"""Acceptance rate, inefficiency factor and equivalent computing time.

The inefficiency factor of a trace of length ``K`` is

    IF = 1 + 2 sum_{j=1}^{L} rho_j,

with ``rho_j`` the biased sample autocorrelation at lag ``j`` and ``L`` the
first lag at which ``|rho_j| < 2 / sqrt(K)``. The equivalent computing time
``ECT = 10 IF t`` is the time needed to get the accuracy of ten independent
draws when one iteration takes ``t`` seconds.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

log = logging.getLogger(__name__)

MIN_TRACE = 50


class InefficiencyWarning(UserWarning):
    pass


def autocorrelation(x, max_lag: int | None = None) -> np.ndarray:
    """Biased sample autocorrelations ``rho_0..rho_max_lag`` via the FFT."""
    x = np.asarray(x, dtype=float)
    K = x.shape[0]
    d = x - x.mean()
    n = 1 << (2 * K - 1).bit_length()
    f = np.fft.rfft(d, n)
    acov = np.fft.irfft(f * np.conj(f), n)[:K] / K
    if acov[0] <= 0:
        return np.full(K if max_lag is None else max_lag + 1, np.nan)
    rho = acov / acov[0]
    return rho if max_lag is None else rho[: max_lag + 1]


def inefficiency(trace) -> float:
    """IF with the ``2 / sqrt(K)`` lag cutoff.

    A constant trace gives NaN (with a warning). A negative value, which the
    estimator can produce for anticorrelated traces, is clamped to 0 with a
    warning.
    """
    x = np.asarray(trace, dtype=float)
    K = x.shape[0]
    if K < MIN_TRACE:
        raise ValueError(f"need at least {MIN_TRACE} draws to estimate an inefficiency factor")
    rho = autocorrelation(x)
    if np.isnan(rho[0]):
        warnings.warn("constant trace: inefficiency factor undefined", InefficiencyWarning, stacklevel=2)
        return float("nan")
    small = np.flatnonzero(np.abs(rho[1:]) < 2.0 / math.sqrt(K))
    L = int(small[0]) + 1 if small.size else K - 1
    value = 1.0 + 2.0 * float(np.sum(rho[1 : L + 1]))
    if value < 0:
        warnings.warn(
            f"negative inefficiency factor {value:.3g} clamped to 0", InefficiencyWarning, stacklevel=2
        )
        return 0.0
    return value


def ect(inefficiency_factor: float, seconds_per_iteration: float) -> float:
    """Equivalent computing time ``10 IF t``."""
    if inefficiency_factor < 0 or seconds_per_iteration < 0:
        raise ValueError("ECT needs a nonnegative inefficiency and time")
    return 10.0 * inefficiency_factor * seconds_per_iteration


def acceptance_rate(flags) -> float:
    """Percentage of accepted proposals."""
    f = np.asarray(flags, dtype=bool)
    if f.size == 0:
        raise ValueError("no acceptance flags")
    return 100.0 * float(f.mean())


def burn_in_start(n: int, fraction: float) -> int:
    if not 0.0 <= fraction < 1.0:
        raise ValueError("burn-in fraction must lie in [0, 1)")
    return int(fraction * n)


@dataclass(frozen=True)
class ParameterSummary:
    name: str
    mean: float
    sd: float
    q025: float
    median: float
    q975: float
    inefficiency: float


@dataclass(frozen=True)
class ChainDiagnostics:
    acceptance_rate: float
    parameters: tuple[ParameterSummary, ...]
    seconds_per_iteration: float
    burn_in: int

    @property
    def inefficiencies(self) -> np.ndarray:
        return np.array([p.inefficiency for p in self.parameters])

    @property
    def if_min(self) -> float:
        return float(np.nanmin(self.inefficiencies))

    @property
    def if_median(self) -> float:
        return float(np.nanmedian(self.inefficiencies))

    @property
    def if_max(self) -> float:
        return float(np.nanmax(self.inefficiencies))

    @property
    def ect(self) -> float:
        """ECT at the median inefficiency."""
        return ect(self.if_median, self.seconds_per_iteration)

    def to_dict(self) -> dict:
        return {
            "acceptance_rate": self.acceptance_rate,
            "if_min": self.if_min,
            "if_median": self.if_median,
            "if_max": self.if_max,
            "seconds_per_iteration": self.seconds_per_iteration,
            "ect": self.ect,
            "burn_in": self.burn_in,
            "parameters": [asdict(p) for p in self.parameters],
        }


def summarize(draws, names, accepted, seconds, burn_in: float = 0.1) -> ChainDiagnostics:
    """Diagnostics of a run after discarding the first ``burn_in`` fraction."""
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    start = burn_in_start(draws.shape[0], burn_in)
    kept = draws[start:]
    params = []
    for i, name in enumerate(names):
        x = kept[:, i]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", InefficiencyWarning)
            ineff = inefficiency(x) if x.shape[0] >= MIN_TRACE else float("nan")
        q = np.quantile(x, [0.025, 0.5, 0.975])
        params.append(
            ParameterSummary(name, float(x.mean()), float(x.std(ddof=1)), float(q[0]), float(q[1]), float(q[2]), ineff)
        )
    return ChainDiagnostics(
        acceptance_rate=acceptance_rate(accepted),
        parameters=tuple(params),
        seconds_per_iteration=float(np.mean(seconds)) if len(seconds) else 0.0,
        burn_in=start,
    )


def diagnose(record, burn_in: float = 0.1) -> ChainDiagnostics:
    return summarize(record.draws, record.names, record.accepted, record.seconds, burn_in)
