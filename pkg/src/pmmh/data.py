"""Observation series read from CSV or simulated from a model."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .priors import ConfigurationError


class DataError(ConfigurationError):
    pass


@dataclass
class Dataset:
    y: np.ndarray
    covariates: dict[str, np.ndarray] = field(default_factory=dict)
    states: np.ndarray | None = None
    source: str = ""

    @property
    def T(self) -> int:
        return int(self.y.shape[0])


def _cell(text: str, path, row: int, col: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"{path}: row {row}, column {col!r}: {text!r} is not a number") from None
    if np.isnan(v) or text.strip() == "":
        raise DataError(f"{path}: row {row}, column {col!r}: missing value")
    return v


def load_dataset(path, count: bool = False) -> Dataset:
    """Read a CSV with a header row.

    The column ``y`` holds the observations and every other column becomes a
    named covariate. Rows are numbered from 1 after the header in error
    messages. With ``count=True`` the observations must be nonnegative
    integers.
    """
    p = Path(path)
    if not p.is_file():
        raise DataError(f"data file {p} not found")
    with open(p, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{p}: empty file") from None
        if "y" not in header:
            raise DataError(f"{p}: no 'y' column in header {header}")
        if len(set(header)) != len(header):
            raise DataError(f"{p}: duplicate column names in header {header}")
        cols: dict[str, list[float]] = {h: [] for h in header}
        for row, rec in enumerate(reader, start=1):
            if not rec or all(c.strip() == "" for c in rec):
                continue
            if len(rec) != len(header):
                raise DataError(f"{p}: row {row} has {len(rec)} cells, expected {len(header)}")
            for h, c in zip(header, rec):
                if c.strip() == "":
                    raise DataError(f"{p}: row {row}, column {h!r}: missing value")
                cols[h].append(_cell(c, p, row, h))
    y = np.array(cols.pop("y"), dtype=float)
    if y.size == 0:
        raise DataError(f"{p}: no observations")
    if count:
        check_counts(y, str(p))
    return Dataset(y, {k: np.array(v) for k, v in cols.items()}, None, str(p))


def check_counts(y, source: str = "data"):
    y = np.asarray(y, dtype=float)
    bad = np.flatnonzero((y < 0) | (y != np.round(y)))
    if bad.size:
        i = int(bad[0])
        raise DataError(f"{source}: row {i + 1}: y = {y[i]:g} is not a nonnegative integer count")


def save_dataset(data: Dataset, path):
    """Write ``y`` and the covariates as CSV (full precision)."""
    names = ["y", *data.covariates]
    cols = [data.y, *data.covariates.values()]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([f"{v:.17g}" for v in row])


def simulate_dataset(model, values: Mapping[str, float], T: int, seed: int, covariates=None) -> Dataset:
    """Forward-simulate ``T`` observations from ``model`` at ``values``."""
    if T < 1:
        raise ConfigurationError("T must be at least 1")
    template = model.parameter_vector(values)
    full = template.as_dict()
    bad = [k for k, v in full.items() if not np.isfinite(v)]
    if bad:
        raise ConfigurationError(f"non-finite parameter values for {bad}")
    covariates = {k: np.asarray(v, dtype=float) for k, v in (covariates or {}).items()}
    rng = np.random.Generator(np.random.PCG64(seed))
    y, states = model.simulate(full, T, rng, covariates)
    return Dataset(y, covariates, states, f"simulated:{model.name}")
