"""Command-line interface: ``pmmh run | simulate | compare | verify | presets``.

Errors are reported on stderr as one JSON object
``{"error": <kind>, "message": <text>}`` with a nonzero exit code
(2 for configuration and data errors, 1 otherwise).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np
import yaml

from .config import apply_overrides, list_presets, load_raw, parse_config
from .data import save_dataset, simulate_dataset
from .models import MODELS, build_model
from .priors import ConfigurationError

log = logging.getLogger("pmmh")


def _kv(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigurationError(f"expected name=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = yaml.safe_load(v)
    return out


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pmmh", description="Particle marginal Metropolis-Hastings runs.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run every replicate of a configuration")
    r.add_argument("config", help="YAML file or the name of a shipped preset")
    r.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a configuration key (value parsed as YAML)")
    r.add_argument("--seed", type=int, help="master seed (run.seed)")
    r.add_argument("--replicates", type=int, help="number of replicates (run.replicates)")
    r.add_argument("--output", help="output directory (run.output)")
    r.add_argument("--data", help="CSV data file (data.path)")
    r.add_argument("--iterations", type=int, help="sampler iterations (sampler.iterations)")
    r.add_argument("--particles", type=int, help="particles per filter (filter.particles)")
    r.add_argument("--jobs", type=int, default=1, help="replicates run in this many processes")
    r.add_argument("--no-plots", action="store_true", help="skip the PNG plots")

    s = sub.add_parser("simulate", help="simulate a data set from a model")
    s.add_argument("model", choices=sorted(MODELS))
    s.add_argument("--T", type=int, required=True, help="series length")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--value", action="append", default=[], metavar="NAME=VALUE", help="true parameter value")
    s.add_argument("--option", action="append", default=[], metavar="NAME=VALUE", help="model option")
    s.add_argument("--output", required=True, help="CSV file to write")
    s.add_argument("--states", help="also write the simulated states to this CSV file")

    c = sub.add_parser("compare", help="log Bayes factor between two runs")
    c.add_argument("a", help="summary.json or run directory of model A")
    c.add_argument("b", help="summary.json or run directory of model B")

    v = sub.add_parser("verify", help="check filters, bounds and evidence against exact results")
    v.add_argument("--quick", action="store_true", help="fewer seeds and draws")

    sub.add_parser("presets", help="list the shipped configuration presets")
    return p


def _run(args) -> int:
    from .runner import run

    raw = load_raw(args.config)
    extra = list(args.overrides)
    for flag, key in (("seed", "run.seed"), ("replicates", "run.replicates"), ("output", "run.output"),
                      ("iterations", "sampler.iterations"), ("particles", "filter.particles")):
        val = getattr(args, flag)
        if val is not None:
            extra.append(f"{key}={val}")
    raw = apply_overrides(raw, extra)
    if args.data is not None:
        raw["data"] = {"path": args.data}
    if args.no_plots:
        raw.setdefault("run", {})["plots"] = False
    cfg = parse_config(raw, str(args.config))
    result = run(cfg, jobs=args.jobs)
    if "table" in result:
        print(result["table"], end="")
    print(f"artifacts written to {result['output']}")
    return 0


def _simulate(args) -> int:
    model = build_model(args.model, **_kv(args.option))
    data = simulate_dataset(model, _kv(args.value), args.T, args.seed)
    save_dataset(data, args.output)
    if args.states:
        np.savetxt(args.states, data.states, delimiter=",", fmt="%.17g")
    print(f"wrote {data.T} observations to {args.output}")
    return 0


def _compare(args) -> int:
    from .runner import compare

    res = compare(args.a, args.b)
    print(json.dumps(res, indent=2))
    return 0


def _verify(args) -> int:
    from .verify import run_all

    checks = run_all(quick=args.quick)
    for c in checks:
        print(c.line())
    return 0 if all(c.passed for c in checks) else 1


def _presets(args) -> int:
    for name in list_presets():
        print(name)
    return 0


def _error(kind: str, exc: BaseException) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc)}) + "\n")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    handler = {"run": _run, "simulate": _simulate, "compare": _compare, "verify": _verify, "presets": _presets}
    try:
        return handler[args.command](args)
    except ConfigurationError as exc:
        _error(type(exc).__name__, exc)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        _error(type(exc).__name__, exc)
        return 1
    except KeyboardInterrupt:
        _error("Interrupted", "interrupted")
        return 130


if __name__ == "__main__":
    sys.exit(main())
