"""Acceptance criteria, one PASS/FAIL line per criterion.

Run under pytest (``pytest -s tests/test_acceptance.py`` shows the lines)
or directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import io
import math
import re
import sys
import time
from contextlib import redirect_stdout
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from blockedlmm import INSTEVAL_FORMULA, LinearMixedModel, crossed_design, load_insteval  # noqa: E402
from blockedlmm import factor  # noqa: E402
from blockedlmm.blocks import DiagonalBlock, SparseBlock  # noqa: E402
from blockedlmm.cli import main as cli_main  # noqa: E402
from blockedlmm.datasets import write_csv  # noqa: E402
from blockedlmm.fit import conditional_modes, fixed_effects  # noqa: E402
from blockedlmm.reference import dense_objective, dense_omega, dense_omega_chol, dense_pls, ols  # noqa: E402
from helpers import random_instance  # noqa: E402


# lines collected for the pytest terminal summary
LINES: list[str] = []


def report(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {title}: {detail}"
    LINES.append(line)
    print(line)


def _close(a, b, tol) -> bool:
    return bool(np.all(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) <= tol))


def criterion_1(ml) -> bool:
    _, r = ml
    vc = {v.group: v.variance for v in r.varcorr}
    checks = {
        "-2logLik": _close(r.objective, 237648.6016, 0.01),
        "AIC": _close(r.aic, 237662.6016, 0.01),
        "AICc": _close(r.aicc, 237662.6032, 0.01),
        "BIC": _close(r.bic, 237727.0294, 0.01),
        "beta": _close(r.beta, [3.27765, -0.0507433], 1e-3),
        "SE": _close(r.se, [0.0235032, 0.0439878], 1e-3),
        "var s": _close(vc["s"], [0.1052958], 1e-3),
        "var d": _close(vc["d"], [0.2624286], 1e-3),
        "var dept": _close(vc["dept"], [0.0025800, 0.0233987], 1e-3),
        "residual": _close(r.sigma2, 1.3850086, 1e-3),
    }
    ok = all(checks.values())
    bad = [k for k, v in checks.items() if not v]
    report(
        1,
        "InstEval ML golden fit",
        ok,
        f"-2logLik {r.objective:.4f}, AIC {r.aic:.4f}, AICc {r.aicc:.4f}, BIC {r.bic:.4f}, "
        f"beta {r.beta[0]:.6f} {r.beta[1]:.7f}, {r.n_evals} evals" + (f"; off: {bad}" if bad else ""),
    )
    return ok


def criterion_2(ml, reml) -> bool:
    _, r = reml
    vc = {v.group: v.variance for v in r.varcorr}
    checks = {
        "criterion": _close(r.objective, 237658.60945, 0.01),
        "var s": _close(vc["s"], [0.1053198], 1e-3),
        "var d": _close(vc["d"], [0.2624398], 1e-3),
        "var dept": _close(vc["dept"], [0.0030492, 0.0256136], 1e-3),
        "residual": _close(r.sigma2, 1.3850023, 1e-3),
        "SE >= ML SE": all(a >= b for a, b in zip(r.se, ml[1].se)),
    }
    ok = all(checks.values())
    bad = [k for k, v in checks.items() if not v]
    report(
        2,
        "InstEval REML golden fit",
        ok,
        f"criterion {r.objective:.5f}, SE {r.se[0]:.7f} {r.se[1]:.7f} vs ML {ml[1].se[0]:.7f} {ml[1].se[1]:.7f}"
        + (f"; off: {bad}" if bad else ""),
    )
    return ok


def criterion_3(ml, table) -> bool:
    model, r = ml
    swapped = LinearMixedModel(INSTEVAL_FORMULA, table, sort=False)
    order = [t.grouping for t in swapped.reterms]
    rs = swapped.fit()
    nnz_sorted, nnz_swapped = model.nnz_L, swapped.nnz_L
    rel = abs(rs.objective - r.objective) / abs(r.objective)
    ok = (
        order[0] == "d"
        and abs(nnz_sorted - 775_000) <= 0.1 * 775_000
        and abs(nnz_swapped - 4_500_000) <= 0.1 * 4_500_000
        and rel <= 1e-6
    )
    report(
        3,
        "fill-in reproduction",
        ok,
        f"nnz(L) sorted {nnz_sorted}, formula order {nnz_swapped}; objectives {r.objective:.4f} / {rs.objective:.4f} (rel diff {rel:.1e})",
    )
    return ok


def criterion_4(ninstances: int = 120) -> bool:
    t0 = time.perf_counter()
    worst_obj = worst_L = worst_r2 = 0.0
    for seed in range(ninstances):
        inst = random_instance(seed)
        m = inst.model
        m.update_L()
        dense = dense_objective(inst.X, inst.y, inst.Z, inst.Lam)
        worst_obj = max(worst_obj, abs(m.objective() - dense) / abs(dense))
        Ld = dense_omega_chol(m.A.to_dense(), inst.Lam)
        worst_L = max(worst_L, float(np.abs(factor.dense_L(m.L) - Ld).max()))
        pls = dense_pls(inst.X, inst.y, inst.Z, inst.Lam)
        worst_r2 = max(worst_r2, abs(factor.pwrss(m) - pls.r2))
    elapsed = time.perf_counter() - t0
    ok = worst_obj <= 1e-8 and worst_L <= 1e-10 and worst_r2 <= 1e-10 and elapsed < 60
    report(
        4,
        "oracle equivalence",
        ok,
        f"{ninstances} instances in {elapsed:.1f} s; max rel objective diff {worst_obj:.1e}, "
        f"max |L diff| {worst_L:.1e}, max |r_yy^2 diff| {worst_r2:.1e}",
    )
    return ok


def criterion_5(ninstances: int = 120) -> bool:
    rng = np.random.default_rng(55)
    scalar_first = 0
    pattern_ok = True
    pd_min = math.inf
    for seed in range(ninstances):
        inst = random_instance(seed)
        m = inst.model
        m.update_L()
        if m.reterms[0].p == 1:
            scalar_first += 1
            pattern_ok &= isinstance(m.L[0, 0], DiagonalBlock)
            for i in range(1, m.dims.k + 1):
                a, l = m.A[i, 0], m.L[i, 0]
                pattern_ok &= a.tag is l.tag
                if isinstance(a, SparseBlock):
                    pattern_ok &= np.array_equal(a.mat.indices, l.mat.indices) and np.array_equal(a.mat.indptr, l.mat.indptr)
        A = m.A.to_dense()
        for r in range(20):
            lb = m.lower_bounds
            theta = np.zeros(lb.size) if r == 0 else np.where(lb == 0, rng.uniform(0, 3, lb.size), rng.normal(0, 2, lb.size))
            m.set_theta(theta)
            Lam = m.dense_lambda()
            q = Lam.shape[0]
            lead = dense_omega(A, Lam)[:q, :q]
            pd_min = min(pd_min, float(np.linalg.eigvalsh(lead).min()))
    ok = bool(pattern_ok) and scalar_first > 0 and pd_min > 0
    report(
        5,
        "structural invariants",
        ok,
        f"{scalar_first} scalar-first instances with L[1,1] Diagonal and unchanged first-column patterns; "
        f"smallest eigenvalue of Omega's leading block over 20 thetas each: {pd_min:.6f}",
    )
    return ok


def criterion_6(ninstances: int = 50) -> bool:
    worst_beta = worst_u = worst_obj = 0.0
    for seed in range(ninstances):
        inst = random_instance(seed)
        m = inst.model
        m.update_L(np.zeros(m.tmap.size))
        beta_ols, rss = ols(inst.X, inst.y)
        beta, _ = fixed_effects(m)
        worst_beta = max(worst_beta, float(np.abs(beta - beta_ols).max(initial=0.0)))
        worst_u = max(worst_u, max(float(np.abs(u).max(initial=0.0)) for u in conditional_modes(m, spherical=True)))
        n = m.dims.n
        expected = n * (1 + math.log(2 * math.pi * rss / n))
        worst_obj = max(worst_obj, abs(m.objective() - expected) / abs(expected))
    ok = worst_beta <= 1e-10 and worst_u <= 1e-10 and worst_obj <= 1e-10
    report(
        6,
        "degenerate reductions at theta = 0",
        ok,
        f"{ninstances} instances; max |beta - OLS| {worst_beta:.1e}, max |u| {worst_u:.1e}, max rel objective diff {worst_obj:.1e}",
    )
    return ok


def _cli_footprint(path: Path) -> int:
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli_main(["blocks", "--formula", "y ~ 1 + x + (1|a) + (1|b)", "--data", str(path)])
    if code != 0:
        raise RuntimeError("blocks command failed")
    return int(re.search(r"total (\d+)", buf.getvalue()).group(1))


def criterion_7(tmpdir: Path) -> bool:
    n, la = 20_000, 5_000
    fp = {}
    for nn, lb in [(n, 1_000), (n, 2_000), (2 * n, 1_000)]:
        path = write_csv(crossed_design(nn, la, lb, seed=7), tmpdir / f"crossed_{nn}_{lb}.csv")
        fp[(nn, lb)] = _cli_footprint(path)
    ratio = fp[(n, 2_000)] / fp[(n, 1_000)]
    n_ratio = fp[(2 * n, 1_000)] / fp[(n, 1_000)]
    ok = ratio >= 3.5 and n_ratio <= 1.25
    report(
        7,
        "footprint growth on a synthetic crossed design",
        ok,
        f"doubling second-factor levels 1000 -> 2000 at n={n}: {fp[(n, 1_000)]} -> {fp[(n, 2_000)]} bytes "
        f"(x{ratio:.2f}); doubling n: x{n_ratio:.3f}",
    )
    return ok


# -------- pytest entry points --------


def test_criterion_1(insteval_ml):
    assert criterion_1(insteval_ml)


def test_criterion_2(insteval_ml, insteval_reml):
    assert criterion_2(insteval_ml, insteval_reml)


def test_criterion_3(insteval_ml, insteval):
    assert criterion_3(insteval_ml, insteval)


def test_criterion_4():
    assert criterion_4()


def test_criterion_5():
    assert criterion_5()


def test_criterion_6():
    assert criterion_6()


def test_criterion_7(tmp_path):
    assert criterion_7(tmp_path)


if __name__ == "__main__":
    import tempfile

    table = load_insteval()
    ml_model = LinearMixedModel(INSTEVAL_FORMULA, table)
    ml = (ml_model, ml_model.fit())
    reml_model = LinearMixedModel(INSTEVAL_FORMULA, table)
    reml = (reml_model, reml_model.fit(reml=True))
    results = [criterion_1(ml), criterion_2(ml, reml), criterion_3(ml, table), criterion_4(), criterion_5(), criterion_6()]
    with tempfile.TemporaryDirectory() as d:
        results.append(criterion_7(Path(d)))
    sys.exit(0 if all(results) else 1)
