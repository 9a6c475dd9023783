"""Bundled and synthetic data sets."""

from __future__ import annotations

import csv
from importlib import resources
from pathlib import Path

import numpy as np

from .ingest import DataTable, load_csv

INSTEVAL_FORMULA = "y ~ 1 + service + (1|d) + (1|s) + (1|dept) + (0 + service|dept)"


def insteval_path() -> Path:
    """Path of the bundled InstEval table (gzip-compressed CSV).

    Columns ``s`` (student), ``d`` (instructor), ``dept``, ``studage``,
    ``lectage``, ``service`` (0/1) and ``y`` (rating), 73421 rows.
    """
    return Path(str(resources.files("blockedlmm") / "data" / "insteval.csv.gz"))


def load_insteval() -> DataTable:
    return load_csv(insteval_path())


def crossed_design(
    n: int,
    nlevels_a: int,
    nlevels_b: int,
    *,
    sd_a: float = 0.5,
    sd_b: float = 0.3,
    sd: float = 1.0,
    seed: int = 0,
) -> DataTable:
    """Simulated responses for two crossed grouping factors ``a`` and ``b``.

    Every level of each factor appears at least once when ``n`` allows it.
    The columns are ``a``, ``b``, ``x`` (standard normal covariate) and ``y``.
    """
    if n < max(nlevels_a, nlevels_b):
        raise ValueError("n must be at least the larger level count")
    rng = np.random.default_rng(seed)
    a = np.concatenate([np.arange(nlevels_a), rng.integers(0, nlevels_a, n - nlevels_a)])
    b = np.concatenate([np.arange(nlevels_b), rng.integers(0, nlevels_b, n - nlevels_b)])
    rng.shuffle(a)
    rng.shuffle(b)
    x = rng.standard_normal(n)
    ua = rng.normal(0.0, sd_a, nlevels_a)
    ub = rng.normal(0.0, sd_b, nlevels_b)
    y = 1.0 + 0.5 * x + ua[a] + ub[b] + rng.normal(0.0, sd, n)
    wa = len(str(nlevels_a))
    wb = len(str(nlevels_b))
    return DataTable.from_columns(
        {
            "a": np.array([f"A{i:0{wa}d}" for i in a]),
            "b": np.array([f"B{i:0{wb}d}" for i in b]),
            "x": x,
            "y": y,
        }
    )


def write_csv(table: DataTable, path: str | Path) -> Path:
    """Write ``table`` as CSV with full float precision."""
    path = Path(path)
    names = list(table.columns)
    cols = [table.columns[c] for c in names]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for r in range(table.nrows):
            w.writerow([repr(float(c[r])) if c.dtype == np.float64 else c[r] for c in cols])
    return path
