"""Run artifacts: draw files, JSON summaries, replicate tables and plots.

``draws.csv`` is written with 17 significant digits and no timing columns,
so a rerun with the same configuration and seed reproduces it byte for byte.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

TABLE_COLUMNS = (
    ("acceptance_rate", "Ac. Rate"),
    ("if_min", "Min. Inef."),
    ("if_median", "Median Inef."),
    ("if_max", "Max. Inef."),
    ("ect", "Median ECT"),
)


def write_draws(record, path):
    """Iteration, parameter values, log-likelihood estimate, log-prior, accepted flag."""
    header = ["iteration", *record.names, "loglik", "log_prior", "accepted"]
    lines = [",".join(header)]
    for j in range(record.n):
        vals = [f"{v:.17g}" for v in record.draws[j]]
        lines.append(
            ",".join(
                [str(j + 1), *vals, f"{record.loglik[j]:.17g}", f"{record.log_prior[j]:.17g}",
                 str(int(record.accepted[j]))]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_draws(path) -> tuple[list[str], np.ndarray]:
    """Header and numeric body of a draw file."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, body


def _clean(obj):
    """Replace non-finite floats by ``None`` so the output is strict JSON."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(obj, path):
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _as_float(v) -> float:
    return float("nan") if v is None else float(v)


def median_iqr(values) -> tuple[float, float]:
    """Median and interquartile range (linear interpolation), ignoring NaN."""
    x = np.asarray([_as_float(v) for v in values], dtype=float)
    x = x[np.isfinite(x)]
    if x.size == 0:
        return float("nan"), float("nan")
    q25, q50, q75 = np.percentile(x, [25, 50, 75])
    return float(q50), float(q75 - q25)


def aggregate(summaries: Sequence[dict]) -> dict:
    """Median and IQR over replicates of each table statistic."""
    out = {}
    for key, _ in TABLE_COLUMNS:
        out[key] = median_iqr([s["diagnostics"][key] for s in summaries])
    ev = [s.get("evidence") for s in summaries if s.get("evidence")]
    if ev:
        out["log_p_bs"] = median_iqr([e["log_p_bs"] for e in ev])
        out["log_p_is"] = median_iqr([e["log_p_is"] for e in ev])
    out["replicates"] = len(summaries)
    return out


def _fmt(v: float) -> str:
    return "nan" if not math.isfinite(v) else f"{v:.2f}"


def format_table(rows: dict[str, dict], title: str = "") -> str:
    """Markdown table with one row per algorithm label and median/IR pairs."""
    head = ["Algorithm"]
    for _, label in TABLE_COLUMNS:
        head += [f"{label} Median", f"{label} IR"]
    lines = []
    if title:
        lines += [f"**{title}**", ""]
    lines.append("| " + " | ".join(head) + " |")
    lines.append("|" + "|".join(["---"] + ["---:"] * (len(head) - 1)) + "|")
    for name, agg in rows.items():
        cells = [name]
        for key, _ in TABLE_COLUMNS:
            med, iqr = agg[key]
            cells += [_fmt(med), _fmt(iqr)]
        lines.append("| " + " | ".join(cells) + " |")
    extra = [(n, a) for n, a in rows.items() if "log_p_bs" in a]
    if extra:
        lines += ["", "| Algorithm | log p_BS(y) median | IR | log p_IS(y) median | IR |", "|---|---:|---:|---:|---:|"]
        for n, a in extra:
            lines.append(
                f"| {n} | {_fmt(a['log_p_bs'][0])} | {_fmt(a['log_p_bs'][1])} "
                f"| {_fmt(a['log_p_is'][0])} | {_fmt(a['log_p_is'][1])} |"
            )
    return "\n".join(lines) + "\n"


def algorithm_label(sampler: str, filter_kind: str) -> str:
    s = {"rwm3c": "RWM3C", "imh": "IMH-MN"}.get(sampler, sampler)
    f = {"sir": "SIR", "apf": "APF", "kalman": "exact"}.get(filter_kind, filter_kind)
    return f"{s} ({f})"


# ---------------------------------------------------------------------------
# plots


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_traces(record, path, burn_in: int = 0):
    plt = _pyplot()
    d = len(record.names)
    fig, axes = plt.subplots(d, 2, figsize=(9, 1.8 * d + 0.6), squeeze=False)
    it = np.arange(1, record.n + 1)
    for i, name in enumerate(record.names):
        axes[i, 0].plot(it, record.draws[:, i], lw=0.4)
        axes[i, 0].axvline(burn_in, color="grey", ls=":", lw=0.8)
        axes[i, 0].set_ylabel(name)
        axes[i, 1].hist(record.draws[burn_in:, i], bins=50, density=True)
    axes[-1, 0].set_xlabel("iteration")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_filtered_state(y, mean, sd, path, true_states=None):
    """Observations and the filtered mean of the first state with a 2 sd band."""
    plt = _pyplot()
    t = np.arange(1, len(y) + 1)
    fig, (a0, a1) = plt.subplots(2, 1, figsize=(9, 5), sharex=True)
    a0.plot(t, y, lw=0.6)
    a0.set_ylabel("y")
    a1.fill_between(t, mean - 2 * sd, mean + 2 * sd, alpha=0.3, lw=0)
    a1.plot(t, mean, lw=0.8, label="filtered mean")
    if true_states is not None:
        a1.plot(t, true_states, lw=0.6, color="k", label="simulated state")
        a1.legend(loc="best", fontsize=8)
    a1.set_ylabel("x")
    a1.set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
