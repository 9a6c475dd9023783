"""Command-line entry points: ``fit``, ``blocks``, ``bench`` and ``report``.

Exit codes: 0 on success (or convergence), 2 when the optimizer did not
converge, 1 on any input or model-specification error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import statistics
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from .datasets import insteval_path
from .factor import FactorizationError
from .fit import FitOptions, FitResult, conditional_modes, fit, render_report
from .formula import FormulaError
from .ingest import DataError, load_csv
from .model import LinearMixedModel
from .relcov import ThetaError

INPUT_ERRORS = (FormulaError, DataError, ThetaError, FactorizationError, ValueError, OSError)


def _data_path(value: str) -> Path:
    # "insteval" names the bundled table unless a file of that name exists
    p = Path(value)
    if value == "insteval" and not p.exists():
        return insteval_path()
    return p


def _load_model(args: argparse.Namespace) -> LinearMixedModel:
    table = load_csv(_data_path(args.data))
    return LinearMixedModel(args.formula, table, sort=not args.no_sort)


def _parse_theta(text: str | None) -> list[float] | None:
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ValueError(f"cannot parse theta {text!r}") from None


def cmd_fit(args: argparse.Namespace) -> int:
    model = _load_model(args)
    opts = FitOptions(
        reml=args.reml,
        max_evals=args.maxevals,
        ftol_abs=args.ftol,
        initial_theta=_parse_theta(args.seed_theta),
        verbose=args.verbose,
    )
    res = fit(model, opts)
    if args.modes:
        res.modes = {
            r.grouping: m.tolist() for r, m in zip(model.reterms, conditional_modes(model, opts.reml))
        }
    sys.stdout.write(res.report())
    if args.json:
        Path(args.json).write_text(res.to_json(indent=1), encoding="utf-8")
    return 0 if res.converged else 2


def cmd_report(args: argparse.Namespace) -> int:
    d = json.loads(Path(args.json).read_text(encoding="utf-8"))
    sys.stdout.write(render_report(FitResult.from_dict(d)))
    return 0


def cmd_blocks(args: argparse.Namespace) -> int:
    model = _load_model(args)
    A, L = model.A, model.L
    out = [model.block_description(), ""]
    out.append(f"nnz(A) = {A.nnz}")
    out.append(f"nnz(L) = {L.nnz}")
    out.append("")
    out.append(f"{'block':<10}{'A tag':<10}{'A bytes':>14}{'L tag':>10}{'L bytes':>14}")
    for (i, j, a), (_, _, l) in zip(A, L):
        out.append(f"[{i + 1},{j + 1}]".ljust(10) + f"{a.tag.value:<10}{a.nbytes:>14}{l.tag.value:>10}{l.nbytes:>14}")
    out.append(f"footprint bytes: A {A.nbytes}, L {L.nbytes}, total {A.nbytes + L.nbytes}")
    print("\n".join(out))
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    model = _load_model(args)
    theta = _parse_theta(args.theta)
    theta = np.asarray(theta if theta is not None else model.theta)
    model.evaluate(theta, reml=args.reml)  # warm-up
    times = []
    for _ in range(args.evals):
        t0 = time.perf_counter()
        model.evaluate(theta, reml=args.reml)
        times.append(time.perf_counter() - t0)
    fit_time = float("nan")
    n_evals = 0
    if not args.no_fit:
        t0 = time.perf_counter()
        res = fit(model, FitOptions(reml=args.reml))
        fit_time = time.perf_counter() - t0
        n_evals = res.n_evals
    row = {
        "formula": model.formula.render(),
        "sorted": not args.no_sort,
        "nnz_L": model.nnz_L,
        "evals": args.evals,
        "median_ms": 1e3 * statistics.median(times),
        "min_ms": 1e3 * min(times),
        "fit_s": fit_time,
        "fit_evals": n_evals,
    }
    print(f"ordering            {'sorted' if row['sorted'] else 'formula order'}")
    print(f"nnz(L)              {row['nnz_L']}")
    print(f"per evaluation      median {row['median_ms']:.4f} ms, min {row['min_ms']:.4f} ms ({args.evals} runs)")
    if not args.no_fit:
        print(f"fit                 {fit_time:.4f} s, {n_evals} evaluations")
    if args.csv:
        new = not Path(args.csv).exists()
        with open(args.csv, "a", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(row))
            if new:
                w.writeheader()
            w.writerow(row)
    return 0


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--formula", required=True, help="model formula, e.g. 'y ~ 1 + x + (1|g)'")
    p.add_argument("--data", required=True, help="CSV file (or 'insteval' for the bundled table)")
    p.add_argument("--no-sort", action="store_true", help="keep random-effects terms in formula order")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blockedlmm", description="Linear mixed models via a blocked Cholesky factor.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model and print its summary")
    _add_model_args(p)
    p.add_argument("--reml", action="store_true", help="use the REML criterion")
    p.add_argument("--maxevals", type=int, default=2000)
    p.add_argument("--ftol", type=float, default=1e-8, help="absolute objective tolerance")
    p.add_argument("--json", metavar="PATH", help="write the fit as JSON")
    p.add_argument("--modes", action="store_true", help="include conditional modes in the JSON")
    p.add_argument("--seed-theta", metavar="V1,V2,...", help="starting value for theta")
    p.add_argument("--verbose", action="store_true", help="log every objective evaluation")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("blocks", help="print block structure, nnz and memory footprint")
    _add_model_args(p)
    p.set_defaults(func=cmd_blocks)

    p = sub.add_parser("bench", help="time objective evaluations")
    _add_model_args(p)
    p.add_argument("--evals", type=int, default=50)
    p.add_argument("--theta", metavar="V1,V2,...", help="theta to evaluate at (default: initial)")
    p.add_argument("--reml", action="store_true")
    p.add_argument("--no-fit", action="store_true", help="skip the timed full fit")
    p.add_argument("--csv", metavar="PATH", help="append the timings to a CSV file")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="re-render the summary of a saved JSON fit")
    p.add_argument("--json", required=True, metavar="PATH")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "verbose", False):
        logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
