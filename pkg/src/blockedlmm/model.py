from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from . import factor
from .factor import FactorState, allocate_L
from .formula import FormulaAST, amalgamate, parse_formula
from .gram import GramBlocks, assemble_A, block_description, sort_terms
from .ingest import DataTable, ModelDims, ReMat, XyMat, build_matrices, load_csv
from .relcov import get_theta, initial_theta, make_templates, set_theta


class LinearMixedModel:
    """A linear mixed-effects model prepared for profiled-likelihood fitting.

    The augmented Gram matrix ``A`` is assembled once here.  Each objective
    evaluation installs a parameter vector and updates the blocked factor
    ``L`` in place.

    Parameters
    ----------
    formula : str or FormulaAST
        Model formula, e.g. ``"y ~ 1 + x + (1 | g)"``.
    data : DataTable
        Columns referenced by the formula.
    sort : bool
        Order the random-effects terms by decreasing size (default).  With
        ``sort=False`` the formula order is kept, which can cause much more
        fill-in in the factor.
    """

    def __init__(self, formula: str | FormulaAST, data: DataTable, *, sort: bool = True):
        self.formula = parse_formula(formula) if isinstance(formula, str) else formula
        specs = amalgamate(self.formula)
        xy, remats, _ = build_matrices(self.formula, specs, data)
        self.xy: XyMat = xy
        self.reterms: list[ReMat] = sort_terms(remats) if sort else list(remats)
        self.dims = ModelDims(
            n=data.nrows,
            p=xy.p,
            k=len(self.reterms),
            p_i=tuple(r.p for r in self.reterms),
            ell_i=tuple(r.nlevels for r in self.reterms),
        )
        self.templates, self.tmap = make_templates([r.corr_mask for r in self.reterms])
        self.A: GramBlocks = assemble_A(self.reterms, xy)
        self.L: GramBlocks = allocate_L(self.A)
        self._factor_state = FactorState(self.A, self.L)
        self._L_valid = False
        self._perfect_fit = False
        self.optsum: dict | None = None
        set_theta(self.templates, self.tmap, initial_theta(self.tmap))

    @classmethod
    def from_csv(cls, formula: str, path: str | Path, **kwargs) -> "LinearMixedModel":
        return cls(formula, load_csv(path), **kwargs)

    def __repr__(self) -> str:
        d = self.dims
        return f"LinearMixedModel({self.formula.render()!r}, n={d.n}, q={d.q}, theta={self.theta.tolist()})"

    @property
    def theta(self) -> np.ndarray:
        return get_theta(self.templates)

    @property
    def lower_bounds(self) -> np.ndarray:
        return self.tmap.lower.copy()

    def set_theta(self, theta: Sequence[float]) -> "LinearMixedModel":
        set_theta(self.templates, self.tmap, theta)
        self._L_valid = False
        return self

    def update_L(self, theta: Sequence[float] | None = None) -> "LinearMixedModel":
        factor.update_L(self, theta)
        return self

    def objective(self, reml: bool = False) -> float:
        return factor.objective_reml(self) if reml else factor.objective(self)

    def evaluate(self, theta: Sequence[float], reml: bool = False) -> float:
        """Install ``theta``, update the factor and return the objective."""
        self.set_theta(theta)
        factor.update_L(self)
        return self.objective(reml)

    @property
    def nnz_L(self) -> int:
        return factor.nnz_L(self)

    @property
    def footprint_bytes(self) -> int:
        return factor.footprint_bytes(self)

    def block_description(self) -> str:
        return block_description(self.A, self.L)

    def dense_Z(self) -> np.ndarray:
        return np.hstack([r.dense_Z() for r in self.reterms])

    def dense_lambda(self) -> np.ndarray:
        from .relcov import dense_lambda

        return dense_lambda(self.templates, [r.nlevels for r in self.reterms])

    def fit(self, **kwargs):
        from .fit import FitOptions, fit

        return fit(self, FitOptions(**kwargs))
