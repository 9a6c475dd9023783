"""Optimization of the profiled objective and post-fit quantities."""

from __future__ import annotations

import json
import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np
import scipy.linalg as sla
from scipy import optimize, stats

from . import factor
from .blocks import BlockDiagonalBlock, DiagonalBlock, SparseBlock
from .formula import INTERCEPT
from .relcov import initial_theta

if TYPE_CHECKING:
    from .model import LinearMixedModel

log = logging.getLogger(__name__)


@dataclass
class FitOptions:
    reml: bool = False
    max_evals: int = 2000
    ftol_abs: float = 1e-8
    xtol_abs: float = 1e-7
    initial_theta: Sequence[float] | None = None
    verbose: bool = False

    def __post_init__(self) -> None:
        if self.max_evals < 1:
            raise ValueError("max_evals must be at least 1")
        if self.ftol_abs <= 0 or self.xtol_abs <= 0:
            raise ValueError("tolerances must be positive")

    @property
    def criterion(self) -> str:
        return "REML" if self.reml else "ML"


@dataclass
class VarCorr:
    """Variance components of one grouping factor.

    ``corr`` is ``None`` where an entry is a structural zero.
    """

    group: str
    columns: list[str]
    variance: list[float]
    stddev: list[float]
    corr: list[list[float | None]]


@dataclass
class FitResult:
    formula: str
    criterion: str
    objective: float
    theta: list[float]
    beta: list[float]
    coef_names: list[str]
    se: list[float]
    sigma: float
    varcorr: list[VarCorr]
    n: int
    ngroups: list[int]
    n_evals: int
    converged: bool
    dof: int
    modes: dict[str, list[list[float]]] | None = field(default=None)

    @property
    def sigma2(self) -> float:
        return self.sigma**2

    @property
    def loglik(self) -> float:
        return -0.5 * self.objective

    @property
    def aic(self) -> float:
        return self.objective + 2 * self.dof

    @property
    def aicc(self) -> float:
        d = self.dof
        return self.aic + 2 * d * (d + 1) / (self.n - d - 1)

    @property
    def bic(self) -> float:
        return self.objective + self.dof * math.log(self.n)

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.modes is None:
            del out["modes"]
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        d = dict(d)
        d["varcorr"] = [VarCorr(**v) for v in d["varcorr"]]
        return cls(**d)

    def report(self) -> str:
        return render_report(self)


def _theta_bounds(model: "LinearMixedModel") -> optimize.Bounds:
    lb = model.tmap.lower
    return optimize.Bounds(lb, np.full_like(lb, np.inf))


class _Converged(Exception):
    pass


def fit(model: "LinearMixedModel", opts: FitOptions | None = None) -> FitResult:
    """Minimize the profiled ML or REML criterion over the covariance parameters.

    A bound-constrained derivative-free trust-region method (COBYQA) is used.
    It stops when its trust region shrinks below ``xtol_abs``, after
    ``max_evals`` evaluations, or when the best objective value improves by
    no more than ``ftol_abs`` over the last ``2 * len(theta) + 2``
    evaluations.
    """
    opts = opts or FitOptions()
    if model.dims.k == 0:
        raise ValueError("the model has no random-effects terms")
    x0 = np.asarray(
        opts.initial_theta if opts.initial_theta is not None else initial_theta(model.tmap),
        dtype=np.float64,
    )
    if x0.shape != (model.tmap.size,):
        raise ValueError(f"initial theta has length {x0.size}, expected {model.tmap.size}")
    lb = model.tmap.lower
    window = 2 * len(x0) + 2
    history: list[float] = []
    best = {"f": math.inf, "x": x0.copy()}

    def obj(x: np.ndarray) -> float:
        x = np.maximum(x, lb)
        f = model.evaluate(x, reml=opts.reml)
        history.append(f)
        if f < best["f"]:
            best["f"], best["x"] = f, x.copy()
        if opts.verbose:
            log.info("eval %d: theta=%s objective=%.10g", len(history), np.array2string(x), f)
        if len(history) >= opts.max_evals:
            raise _Converged(False)
        if len(history) > window:
            before = min(history[:-window])
            if before - best["f"] <= opts.ftol_abs:
                raise _Converged(True)
        return f

    t0 = time.perf_counter()
    converged = True
    message = "trust region radius below tolerance"
    try:
        res = optimize.minimize(
            obj,
            x0,
            method="COBYQA",
            bounds=_theta_bounds(model),
            options={
                "maxfev": opts.max_evals + 1,
                "final_tr_radius": opts.xtol_abs,
                "initial_tr_radius": 0.5,
                "scale": False,
            },
        )
        converged = bool(res.success)
        message = str(res.message)
    except _Converged as stop:
        converged = bool(stop.args[0])
        message = "objective change below ftol_abs" if converged else "max_evals reached"
    elapsed = time.perf_counter() - t0

    theta_hat = best["x"]
    fmin = model.evaluate(theta_hat, reml=opts.reml)
    model.optsum = {
        "initial": x0.tolist(),
        "final": theta_hat.tolist(),
        "fmin": fmin,
        "feval": len(history),
        "message": message,
        "elapsed": elapsed,
        "reml": opts.reml,
    }
    model._reml = opts.reml
    return extract_result(model, opts.reml, n_evals=len(history), converged=converged)


def extract_result(
    model: "LinearMixedModel", reml: bool, n_evals: int = 0, converged: bool = True
) -> FitResult:
    """Summaries at the parameter vector currently installed in ``model``."""
    if not model._L_valid:
        factor.update_L(model)
    obj = model.objective(reml)
    beta, se = fixed_effects(model, reml)
    s2 = sigma2(model, reml)
    return FitResult(
        formula=model.formula.render(),
        criterion="REML" if reml else "ML",
        objective=obj,
        theta=model.theta.tolist(),
        beta=beta.tolist(),
        coef_names=list(model.xy.coef_names),
        se=se.tolist(),
        sigma=math.sqrt(s2),
        varcorr=varcorr(model, s2),
        n=model.dims.n,
        ngroups=list(model.dims.ell_i),
        n_evals=n_evals,
        converged=converged,
        dof=model.tmap.size + model.dims.p + 1,
    )


def sigma2(model: "LinearMixedModel", reml: bool = False) -> float:
    """Conditional estimate of the residual variance."""
    n, p = model.dims.n, model.dims.p
    r2 = factor.pwrss(model)
    if r2 == 0.0:
        warnings.warn("residual sum of squares is zero (perfect fit)", factor.PerfectFitWarning, stacklevel=2)
    return r2 / (n - p if reml else n)


def _xy_factor(model: "LinearMixedModel") -> tuple[np.ndarray, np.ndarray]:
    p = model.dims.p
    a = model.L[-1, -1].a
    return np.tril(a[:p, :p]), a[p, :p].copy()


def fixed_effects(model: "LinearMixedModel", reml: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Conditional estimates of the fixed effects and their standard errors."""
    factor._check_current(model)
    p = model.dims.p
    if p == 0:
        return np.empty(0), np.empty(0)
    LXX, rXy = _xy_factor(model)
    if np.any(np.diag(LXX) <= 0):
        raise factor.FactorizationError("fixed-effects model matrix is rank deficient")
    beta = sla.solve_triangular(LXX, rXy, lower=True, trans="T")
    # rows of R_XX^{-1} are columns of L_XX^{-1}
    Linv = sla.solve_triangular(LXX, np.eye(p), lower=True)
    se = math.sqrt(sigma2(model, reml)) * np.sqrt(np.sum(Linv**2, axis=0))
    return beta, se


def conditional_modes(
    model: "LinearMixedModel", reml: bool = False, spherical: bool = False
) -> list[np.ndarray]:
    """Conditional modes of the random effects, one ``nlevels x p`` array per term.

    The spherical modes ``u`` come from back-substitution through the
    random-effects blocks of the factor; the returned modes are ``Lambda u``
    unless ``spherical`` is set.
    """
    factor._check_current(model)
    k, p = model.dims.k, model.dims.p
    L = model.L
    beta, _ = fixed_effects(model, reml)
    u: list[np.ndarray] = [np.empty(0)] * k
    for j in reversed(range(k)):
        xyrow = L[k, j].a
        r = xyrow[p] - xyrow[:p].T @ beta
        for i in range(j + 1, k):
            b = L[i, j]
            r -= b.mat.T @ u[i] if isinstance(b, SparseBlock) else b.a.T @ u[i]
        Ljj = L[j, j]
        if isinstance(Ljj, DiagonalBlock):
            u[j] = r / Ljj.d
        elif isinstance(Ljj, BlockDiagonalBlock):
            rr = r.reshape(-1, Ljj.p, 1)
            u[j] = np.linalg.solve(Ljj.tiles.transpose(0, 2, 1), rr).ravel()
        else:
            u[j] = sla.solve_triangular(Ljj.a, r, lower=True, trans="T")
    out = []
    for t, uj in zip(model.templates, u):
        uj = uj.reshape(-1, t.p)
        out.append(uj if spherical else uj @ t.values.T)
    return out


def _display_name(c: str) -> str:
    return "(Intercept)" if c == INTERCEPT else c


def varcorr(model: "LinearMixedModel", s2: float) -> list[VarCorr]:
    out = []
    for r, t in zip(model.reterms, model.templates):
        cov = s2 * (t.values @ t.values.T)
        sd = np.sqrt(np.diag(cov))
        corr: list[list[float | None]] = []
        for i in range(t.p):
            row: list[float | None] = []
            for j in range(i):
                # structural zero unless the two template rows share a free column
                if not np.any(t.mask[i] & t.mask[j]):
                    row.append(None)
                elif sd[i] > 0 and sd[j] > 0:
                    row.append(float(cov[i, j] / (sd[i] * sd[j])))
                else:
                    row.append(0.0)
            corr.append(row)
        out.append(
            VarCorr(
                group=r.grouping,
                columns=[_display_name(c) for c in r.columns],
                variance=np.diag(cov).tolist(),
                stddev=sd.tolist(),
                corr=corr,
            )
        )
    return out


def _fmt_p(z: float) -> str:
    pv = 2.0 * stats.norm.sf(abs(z))
    if pv < 1e-99:
        return "<1e-99"
    if pv < 1e-4:
        return f"{pv:.0e}"
    return f"{pv:.4f}"


def render_report(res: FitResult) -> str:
    """Plain-text summary in the layout of the usual mixed-model display."""
    lines = []
    if res.criterion == "REML":
        lines.append("Linear mixed model fit by REML")
        lines.append(f" {res.formula}")
        lines.append(f" REML criterion at convergence: {res.objective!r}")
    else:
        lines.append("Linear mixed model fit by maximum likelihood")
        lines.append(f" {res.formula}")
        heads = ["logLik", "-2 logLik", "AIC", "AICc", "BIC"]
        vals = [res.loglik, res.objective, res.aic, res.aicc, res.bic]
        lines.append(" " + " ".join(f"{h:>13}" for h in heads))
        lines.append(" " + " ".join(f"{v:>13.4f}" for v in vals))
    lines.append("")
    lines.append("Variance components:")
    lines.append(f"{'':9}{'Column':<13}{'Variance':>10}{'Std.Dev.':>11}   Corr.")
    for vc in res.varcorr:
        for i, col in enumerate(vc.columns):
            grp = vc.group if i == 0 else ""
            line = f"{grp:<9}{col:<13}{vc.variance[i]:>10.7f}{vc.stddev[i]:>11.7f}"
            if vc.corr[i]:
                cells = ["  .  " if c is None else f"{c:+.2f}" for c in vc.corr[i]]
                line += "   " + " ".join(cells)
            lines.append(line.rstrip())
    lines.append(f"{'Residual':<9}{'':<13}{res.sigma ** 2:>10.7f}{res.sigma:>11.7f}")
    groups = ", ".join(str(g) for g in res.ngroups)
    lines.append(f" Number of obs: {res.n}; levels of grouping factors: {groups}")
    lines.append("")
    lines.append("  Fixed-effects parameters:")
    rule = "─" * 62
    lines.append(rule)
    lines.append(f"{'':14}{'Coef.':>13}{'Std. Error':>13}{'z':>10}{'Pr(>|z|)':>11}")
    lines.append(rule)
    width = max([14] + [len(c) + 1 for c in res.coef_names])
    for name, b, s in zip(res.coef_names, res.beta, res.se):
        z = b / s if s > 0 else math.inf
        lines.append(f"{name:<{width}}{b:>13.7g}{s:>13.7g}{z:>10.2f}{_fmt_p(z):>11}")
    lines.append(rule)
    if not res.converged:
        lines.append("WARNING: the optimizer did not converge")
    return "\n".join(lines) + "\n"
