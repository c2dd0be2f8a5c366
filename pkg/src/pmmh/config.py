"""Run configuration read from YAML.

A configuration has the sections ``model``, ``data``, ``filter``,
``sampler``, ``parallel``, ``evidence`` and ``run``; see the README for the
full grammar. Every section is optional except ``model`` and ``data``.
Unknown keys are rejected so typos surface before any computation.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .filters import FilterSettings
from .kernel import ChainConfig
from .models import build_model
from .priors import ConfigurationError, prior_from_spec

PRESET_DIR = Path(__file__).parent / "presets"
DEFENSIVE_EPSILON = 0.05

_SECTIONS = {
    "model": {"name", "options", "values", "fixed", "priors"},
    "data": {"path", "simulate"},
    "filter": {"kind", "particles", "resampling", "epsilon", "defensive"},
    "sampler": {
        "name", "iterations", "j0", "sigma1", "kappas", "warmup", "refit_at", "stage2_at",
        "growth_base", "max_components", "em_iter", "ridge", "refit_window", "initial",
        "init_tries", "progress_every",
    },
    "parallel": {"scheme", "workers", "threads", "block_sizes"},
    "evidence": {"enabled", "n_q", "u_particles"},
    "run": {"seed", "replicates", "output", "burn_in", "plots"},
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "model": {"options": {}, "values": {}, "fixed": None, "priors": {}},
    "data": {"path": None, "simulate": None},
    "filter": {"kind": "sir", "particles": 500, "resampling": "stratified", "epsilon": None, "defensive": False},
    "sampler": {"name": "imh", "iterations": 10_000},
    "parallel": {"scheme": "none", "workers": 1, "threads": 1, "block_sizes": None},
    "evidence": {"enabled": True, "n_q": None, "u_particles": None},
    "run": {"seed": 0, "replicates": 1, "output": "pmmh-output", "burn_in": 0.1, "plots": True},
}


@dataclass
class RunConfig:
    raw: dict
    model_name: str
    model_options: dict
    values: dict
    fixed: tuple | None
    priors: dict
    data_path: str | None
    simulate: dict | None
    filter_kind: str
    filter: FilterSettings
    chain: ChainConfig
    scheme: str
    workers: int
    threads: int
    evidence: bool
    n_q: int | None
    u_particles: int | None
    seed: int
    replicates: int
    output: str
    burn_in: float
    plots: bool
    source: str = field(default="<config>")

    def build_model(self):
        return build_model(self.model_name, **self.model_options)


def _merge(base: dict, over: Mapping) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), dict) and k not in ("values", "priors", "options", "initial"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _parse_scalar(text: str):
    return yaml.safe_load(text)


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``section.key=value`` overrides (values parsed as YAML)."""
    raw = copy.deepcopy(raw)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not of the form section.key=value")
        path, value = item.split("=", 1)
        keys = path.strip().split(".")
        node = raw
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigurationError(f"override {item!r}: {k!r} is not a section")
        node[keys[-1]] = _parse_scalar(value)
    return raw


def load_raw(path) -> dict:
    p = Path(path)
    if not p.exists():
        candidate = PRESET_DIR / f"{path}.yaml"
        if candidate.exists():
            p = candidate
        else:
            raise ConfigurationError(f"config file {path} not found (and no preset of that name)")
    with open(p) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{p}: top level must be a mapping")
    return raw


def list_presets() -> list[str]:
    return sorted(f.stem for f in PRESET_DIR.glob("*.yaml"))


def parse_config(raw: Mapping, source: str = "<config>") -> RunConfig:
    """Validate a configuration mapping and build a :class:`RunConfig`."""
    try:
        return _parse(raw, source)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{source}: {exc}") from None


def _parse(raw: Mapping, source: str) -> RunConfig:
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ConfigurationError(f"unknown sections {sorted(unknown)}")
    for sec, keys in _SECTIONS.items():
        bad = set(raw.get(sec) or {}) - keys
        if bad:
            raise ConfigurationError(f"unknown keys in {sec}: {sorted(bad)}")
    cfg = _merge(DEFAULTS, raw)
    m, d, f, s, par, ev, run = (cfg[k] for k in ("model", "data", "filter", "sampler", "parallel", "evidence", "run"))

    if "name" not in m:
        raise ConfigurationError("model.name is required")
    model = build_model(m["name"], **(m.get("options") or {}))
    values = {k: float(v) for k, v in (m.get("values") or {}).items()}
    # listed names are fixed in addition to the model's own fixed parameters
    fixed = None if m.get("fixed") is None else tuple(dict.fromkeys([*model.default_fixed(), *m["fixed"]]))
    template = model.parameter_vector(values, fixed)
    priors = {k: prior_from_spec(v) for k, v in (m.get("priors") or {}).items()}
    unknown_p = set(priors) - set(template.names)
    if unknown_p:
        raise ConfigurationError(f"priors given for unknown parameters {sorted(unknown_p)}")

    if (d.get("path") is None) == (d.get("simulate") is None):
        raise ConfigurationError("data needs exactly one of 'path' or 'simulate'")
    sim = d.get("simulate")
    if sim is not None:
        if "T" not in sim:
            raise ConfigurationError("data.simulate needs T")
        bad = set(sim) - {"T", "seed", "values", "covariates"}
        if bad:
            raise ConfigurationError(f"unknown keys in data.simulate: {sorted(bad)}")

    kind = f["kind"]
    if kind not in ("sir", "apf", "kalman"):
        raise ConfigurationError(f"filter.kind must be 'sir', 'apf' or 'kalman', got {kind!r}")
    if kind == "kalman" and m["name"] != "linear_gaussian":
        raise ConfigurationError("filter.kind 'kalman' (exact likelihood) needs the linear_gaussian model")
    defensive = bool(f["defensive"])
    if defensive and kind != "apf":
        raise ConfigurationError("filter.defensive needs filter.kind 'apf'")
    # the defensive filter mixes in the bound with weight 0.05 unless told otherwise
    eps = f["epsilon"] if f["epsilon"] is not None else (DEFENSIVE_EPSILON if defensive else 0.0)
    fs = FilterSettings(int(f["particles"]), f["resampling"], float(eps))
    if kind != "apf" and fs.apf_epsilon > 0:
        raise ConfigurationError("filter.epsilon only applies to the auxiliary filter")
    if defensive and fs.apf_epsilon <= 0:
        raise ConfigurationError("filter.defensive needs a positive epsilon")

    scheme = par["scheme"]
    if scheme not in ("none", "average", "block"):
        raise ConfigurationError(f"parallel.scheme must be none, average or block, got {scheme!r}")
    workers = int(par["workers"])
    if workers < 1:
        raise ConfigurationError("parallel.workers must be positive")
    if kind == "kalman" and scheme == "average":
        raise ConfigurationError("averaging needs a particle-filter likelihood")
    if scheme == "block" and not par.get("block_sizes"):
        raise ConfigurationError("parallel.block_sizes is required for the block scheme")

    chain_kwargs = {k: v for k, v in s.items() if k != "name"}
    chain_kwargs["sampler"] = s["name"]
    for key in ("refit_at", "kappas"):
        if chain_kwargs.get(key) is not None:
            chain_kwargs[key] = tuple(chain_kwargs[key])
    if scheme == "block":
        chain_kwargs["block_sizes"] = tuple(int(k) for k in par["block_sizes"])
        chain_kwargs["block_workers"] = workers
    try:
        chain = ChainConfig(**chain_kwargs)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None
    if isinstance(chain.initial, Mapping):
        bad = set(chain.initial) - set(template.names)
        if bad:
            raise ConfigurationError(f"sampler.initial names unknown parameters {sorted(bad)}")

    if ev["enabled"] and chain.sampler != "imh":
        ev["enabled"] = False
    replicates = int(run["replicates"])
    if replicates < 1:
        raise ConfigurationError("run.replicates must be at least 1")

    return RunConfig(
        raw=dict(raw),
        model_name=m["name"],
        model_options=dict(m.get("options") or {}),
        values=values,
        fixed=fixed,
        priors=priors,
        data_path=d.get("path"),
        simulate=sim,
        filter_kind=kind,
        filter=fs,
        chain=chain,
        scheme=scheme,
        workers=workers,
        threads=int(par["threads"]),
        evidence=bool(ev["enabled"]),
        n_q=ev.get("n_q"),
        u_particles=ev.get("u_particles"),
        seed=int(run["seed"]),
        replicates=replicates,
        output=str(run["output"]),
        burn_in=float(run["burn_in"]),
        plots=bool(run["plots"]),
        source=source,
    )


def load_config(path, overrides=()) -> RunConfig:
    raw = apply_overrides(load_raw(path), overrides)
    return parse_config(raw, str(path))
