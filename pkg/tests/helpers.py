"""Random small mixed models and their dense counterparts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from blockedlmm import DataTable, LinearMixedModel

# random-effects term shapes: (expression, needs covariate)
_TERM_FORMS = ["1", "1 + x", "0 + x", "zerocorr(1 + x)", "1 + z"]


def random_table(rng: np.random.Generator, n: int, nlevels: list[int]) -> DataTable:
    cols: dict[str, np.ndarray] = {}
    for g, ell in enumerate(nlevels):
        ell = min(ell, n)
        refs = np.concatenate([np.arange(ell), rng.integers(0, ell, n - ell)])
        rng.shuffle(refs)
        cols[f"g{g + 1}"] = np.array([f"L{r:03d}" for r in refs])
    cols["x"] = rng.standard_normal(n)
    cols["z"] = rng.uniform(-1, 2, n)
    cols["y"] = rng.standard_normal(n) + 0.5 * cols["x"]
    return DataTable.from_columns(cols)


def random_formula(rng: np.random.Generator, k: int) -> str:
    fixed = rng.choice(["1", "1 + x", "1 + x + z", "0 + x"])
    parts = [f"y ~ {fixed}"]
    for g in range(1, k + 1):
        form = _TERM_FORMS[rng.integers(len(_TERM_FORMS))]
        if form.startswith("zerocorr"):
            parts.append(f"zerocorr({form[9:-1]} | g{g})")
        else:
            parts.append(f"({form} | g{g})")
    # occasionally split one factor over two formula terms
    if rng.random() < 0.2:
        parts.append(f"(0 + z | g{k})")
    return " + ".join(parts)


def random_theta(rng: np.random.Generator, model: LinearMixedModel, zero_prob: float = 0.2) -> np.ndarray:
    lb = model.lower_bounds
    theta = np.where(lb == 0, rng.uniform(0.0, 2.0, lb.size), rng.normal(0.0, 0.7, lb.size))
    theta[rng.random(lb.size) < zero_prob] = 0.0
    return theta


@dataclass
class Instance:
    model: LinearMixedModel
    theta: np.ndarray
    X: np.ndarray
    y: np.ndarray
    Z: np.ndarray
    Lam: np.ndarray


def random_instance(seed: int) -> Instance:
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 4))
    n = int(rng.integers(20, 201))
    nlevels = [int(rng.integers(2, 25)) for _ in range(k)]
    table = random_table(rng, n, nlevels)
    model = LinearMixedModel(random_formula(rng, k), table)
    theta = random_theta(rng, model)
    model.set_theta(theta)
    return Instance(model, theta, model.xy.X, model.xy.y, model.dense_Z(), model.dense_lambda())
