"""Run orchestration: data, targets, replicates and their artifacts.

Replicate ``r`` uses the seed ``derive_seed(master, 3, r)``, so replicates
are reproducible individually and never share random streams. Each
replicate writes into its own directory, which lets them run in separate
processes.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import report
from .config import RunConfig, parse_config
from .data import Dataset, check_counts, load_dataset, save_dataset, simulate_dataset
from .diagnostics import diagnose
from .evidence import EvidenceError, estimate_evidence
from .filters import FilterSettings, run_filter
from .kernel import run_chain
from .parallel import WorkerPool, derive_seed
from .targets import ExactTarget, ParticleTarget

log = logging.getLogger(__name__)

REPLICATE_STREAM = 3


def replicate_seed(master: int, r: int) -> int:
    return derive_seed(master, REPLICATE_STREAM, r)


def prepare_data(cfg: RunConfig, model) -> Dataset:
    if cfg.data_path is not None:
        data = load_dataset(cfg.data_path, count=model.count_data)
    else:
        sim = cfg.simulate
        values = {**cfg.values, **(sim.get("values") or {})}
        data = simulate_dataset(model, values, int(sim["T"]), int(sim.get("seed", cfg.seed)), sim.get("covariates"))
    if model.count_data:
        check_counts(data.y, data.source)
    model.covariate_matrix(data.covariates, data.T)
    return data


def build_target(cfg: RunConfig, model, data: Dataset, pool: WorkerPool | None = None):
    template = model.parameter_vector(cfg.values, cfg.fixed)
    if cfg.filter_kind == "kalman":
        return ExactTarget.kalman(model, data.y, cfg.priors, template)
    workers = cfg.workers if cfg.scheme == "average" else 1
    return ParticleTarget(
        model, data.y, cfg.priors, template, cfg.filter, cfg.filter_kind,
        data.covariates, workers=workers, pool=pool,
    )


def _filtered_band(cfg, model, data, target, theta):
    kind = "sir" if cfg.filter_kind == "kalman" else cfg.filter_kind
    settings = FilterSettings(max(cfg.filter.particles, 1000), cfg.filter.resampling, cfg.filter.apf_epsilon,
                              derive_seed(cfg.seed, REPLICATE_STREAM, 10**6))
    _, mom = run_filter(model, target.values(theta), data.y, settings, kind, data.covariates, moments=True)
    return mom.mean[:, 0], np.sqrt(mom.var[:, 0])


def run_replicate(cfg: RunConfig, data: Dataset, r: int, out: Path) -> dict:
    """Run one replicate, write its artifacts and return its summary."""
    model = cfg.build_model()
    seed = replicate_seed(cfg.seed, r)
    out.mkdir(parents=True, exist_ok=True)
    with WorkerPool(cfg.workers, cfg.threads) as pool:
        target = build_target(cfg, model, data, pool)
        record = run_chain(target, cfg.chain, seed, pool if cfg.scheme == "block" else None)
        report.write_draws(record, out / "draws.csv")
        summary = {
            "replicate": r,
            "seed": seed,
            "master_seed": cfg.seed,
            "model": model.describe(),
            "parameters": list(record.names),
            "sampler": cfg.chain.sampler,
            "filter": {"kind": cfg.filter_kind, "particles": cfg.filter.particles,
                       "resampling": cfg.filter.resampling, "epsilon": cfg.filter.apf_epsilon},
            "parallel": {"scheme": cfg.scheme, "workers": cfg.workers},
            "iterations": record.n,
            "failures": record.failures,
            "components": [list(c) for c in record.components],
            "data": {"source": data.source, "T": data.T},
            "diagnostics": None,
            "evidence": None,
        }
        if record.n == 0:
            report.write_json(summary, out / "summary.json")
            return summary
        diag = diagnose(record, cfg.burn_in)
        summary["diagnostics"] = diag.to_dict()
        if cfg.evidence and record.proposal is not None:
            try:
                ev = estimate_evidence(record, target, seed, cfg.n_q, cfg.burn_in, cfg.u_particles, pool)
                summary["evidence"] = ev.to_dict()
            except EvidenceError as exc:
                log.warning("replicate %d: evidence failed: %s", r, exc)
                summary["evidence_error"] = str(exc)
        if cfg.plots:
            report.plot_traces(record, out / "trace.png", diag.burn_in)
            theta = record.draws[diag.burn_in :].mean(axis=0)
            if math.isfinite(target.log_prior(theta)):
                mean, sd = _filtered_band(cfg, model, data, target, theta)
                true = data.states[1:, 0] if data.states is not None else None
                report.plot_filtered_state(data.y, mean, sd, out / "filtered_state.png", true)
    report.write_json(summary, out / "summary.json")
    return summary


def _replicate_job(args):
    raw, source, data, r, out = args
    return run_replicate(parse_config(raw, source), data, r, Path(out))


def run(cfg: RunConfig, jobs: int = 1) -> dict:
    """All replicates of a configuration plus the aggregate table."""
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    model = cfg.build_model()
    data = prepare_data(cfg, model)
    (out / "config.yaml").write_text(yaml.safe_dump(cfg.raw, sort_keys=True))
    if cfg.simulate is not None:
        save_dataset(data, out / "data.csv")
        if data.states is not None:
            np.savetxt(out / "states.csv", data.states, delimiter=",", fmt="%.17g")
    width = max(2, len(str(cfg.replicates)))
    dirs = [out / f"replicate-{r + 1:0{width}d}" for r in range(cfg.replicates)]
    if jobs > 1 and cfg.replicates > 1:
        args = [(cfg.raw, cfg.source, data, r, str(d)) for r, d in enumerate(dirs)]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            summaries = list(ex.map(_replicate_job, args))
    else:
        summaries = [run_replicate(cfg, data, r, d) for r, d in enumerate(dirs)]
    done = [s for s in summaries if s["diagnostics"] is not None]
    result = {"output": str(out), "summaries": summaries}
    if done:
        label = report.algorithm_label(cfg.chain.sampler, cfg.filter_kind)
        agg = report.aggregate(done)
        title = f"{model.name}: {len(done)} replicate(s), {cfg.chain.iterations} iterations"
        table = report.format_table({label: agg}, title)
        (out / "table.md").write_text(table)
        report.write_json({"label": label, **agg}, out / "aggregate.json")
        result["table"] = table
    return result


def collect_summaries(path) -> list[dict]:
    """Summaries from a ``summary.json`` file or a run directory."""
    p = Path(path)
    if p.is_file():
        return [report.read_json(p)]
    files = sorted(p.glob("replicate-*/summary.json")) or sorted(p.glob("summary.json"))
    if not files:
        raise FileNotFoundError(f"no summary.json under {p}")
    return [report.read_json(f) for f in files]


def log_evidence(summaries: list[dict]) -> dict:
    """Median log evidence (bridge and importance) over replicates."""
    ev = [s["evidence"] for s in summaries if s.get("evidence")]
    if not ev:
        raise ValueError("no evidence estimates in these summaries (evidence needs the independence sampler)")
    return {
        "log_p_bs": float(np.median([e["log_p_bs"] for e in ev])),
        "log_p_is": float(np.median([e["log_p_is"] for e in ev])),
        "n": len(ev),
    }


def compare(path_a, path_b) -> dict:
    """Log Bayes factor of A against B: difference of log evidence."""
    a, b = log_evidence(collect_summaries(path_a)), log_evidence(collect_summaries(path_b))
    return {
        "a": {"path": str(path_a), **a},
        "b": {"path": str(path_b), **b},
        "log_bf_bs": a["log_p_bs"] - b["log_p_bs"],
        "log_bf_is": a["log_p_is"] - b["log_p_is"],
    }
