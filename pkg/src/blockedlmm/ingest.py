"""Tabular data loading and construction of the model matrices."""

from __future__ import annotations

import csv
import gzip
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .formula import INTERCEPT, FormulaAST, TermSpec


class DataError(ValueError):
    """Problems with the input table or its columns."""


@dataclass
class DataTable:
    """Named columns of equal length, either float64 or categorical strings."""

    columns: dict[str, np.ndarray]
    nrows: int

    @classmethod
    def from_columns(cls, columns: Mapping[str, Sequence]) -> "DataTable":
        out: dict[str, np.ndarray] = {}
        nrows = None
        for name, values in columns.items():
            arr = np.asarray(values)
            if arr.ndim != 1:
                raise DataError(f"column {name!r} is not one-dimensional")
            if nrows is None:
                nrows = len(arr)
            elif len(arr) != nrows:
                raise DataError(f"column {name!r} has {len(arr)} rows, expected {nrows}")
            if arr.dtype.kind in "biuf":
                arr = arr.astype(np.float64)
                if np.isnan(arr).any():
                    raise DataError(f"missing value in column {name!r}")
            else:
                arr = arr.astype(str)
            out[name] = arr
        if not out or not nrows:
            raise DataError("empty table")
        return cls(out, nrows)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise DataError(f"unknown column {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    def is_numeric(self, name: str) -> bool:
        return self[name].dtype == np.float64


def load_csv(path: str | Path) -> DataTable:
    """Read a header-first CSV file (optionally gzip-compressed).

    Columns whose every entry parses as a float become float64; the
    others are kept as strings.  Empty cells and ragged rows are errors.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt", encoding="utf-8", newline="") as fh:
        return _read_csv(fh)


def read_csv_text(text: str) -> DataTable:
    return _read_csv(io.StringIO(text))


def _read_csv(fh) -> DataTable:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty table") from None
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        raise DataError("duplicate column names in header")
    ncol = len(header)
    cells: list[list[str]] = [[] for _ in range(ncol)]
    nrows = 0
    for r, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != ncol:
            raise DataError(f"row {r} has {len(row)} fields, expected {ncol}")
        for c, value in enumerate(row):
            value = value.strip()
            if value == "":
                raise DataError(f"missing value at row {r}, column {header[c]}")
            cells[c].append(value)
        nrows += 1
    if nrows == 0:
        raise DataError("empty table")
    columns = {}
    for name, values in zip(header, cells):
        try:
            columns[name] = np.array([float(v) for v in values], dtype=np.float64)
        except ValueError:
            columns[name] = np.array(values, dtype=str)
    return DataTable(columns, nrows)


@dataclass
class XyMat:
    """Fixed-effects model matrix with the response appended as last column."""

    xy: np.ndarray
    names: tuple[str, ...]

    @property
    def X(self) -> np.ndarray:
        return self.xy[:, :-1]

    @property
    def y(self) -> np.ndarray:
        return self.xy[:, -1]

    @property
    def p(self) -> int:
        return self.xy.shape[1] - 1

    @property
    def coef_names(self) -> tuple[str, ...]:
        return self.names[:-1]


@dataclass
class ReMat:
    """Random-effects structure for one grouping factor.

    ``refs`` holds 0-based level indices.  Column ``l * p + a`` of the
    implied ``Z`` block is ``wide[:, a]`` restricted to rows with level ``l``.
    """

    grouping: str
    refs: np.ndarray
    levels: tuple[str, ...]
    wide: np.ndarray
    columns: tuple[str, ...]
    corr_mask: np.ndarray

    @property
    def p(self) -> int:
        return self.wide.shape[1]

    @property
    def nlevels(self) -> int:
        return len(self.levels)

    @property
    def q(self) -> int:
        return self.nlevels * self.p

    @property
    def n(self) -> int:
        return len(self.refs)

    def dense_Z(self) -> np.ndarray:
        Z = np.zeros((self.n, self.q))
        rows = np.arange(self.n)
        for a in range(self.p):
            Z[rows, self.refs * self.p + a] = self.wide[:, a]
        return Z

    def counts(self) -> np.ndarray:
        return np.bincount(self.refs, minlength=self.nlevels)


@dataclass
class ModelDims:
    n: int
    p: int
    k: int
    p_i: tuple[int, ...]
    ell_i: tuple[int, ...]
    q_i: tuple[int, ...] = field(init=False)
    q: int = field(init=False)
    size: int = field(init=False)

    def __post_init__(self) -> None:
        self.q_i = tuple(a * b for a, b in zip(self.p_i, self.ell_i))
        self.q = sum(self.q_i)
        self.size = self.q + self.p + 1


def _numeric(table: DataTable, name: str, role: str) -> np.ndarray:
    col = table[name]
    if not table.is_numeric(name):
        raise DataError(f"categorical column {name!r} used as {role}")
    return col


def _model_columns(table: DataTable, expr: Sequence[str], role: str) -> np.ndarray:
    cols = []
    for name in expr:
        if name == INTERCEPT:
            cols.append(np.ones(table.nrows))
        else:
            cols.append(_numeric(table, name, role))
    return np.column_stack(cols) if cols else np.empty((table.nrows, 0))


def build_remat(spec: TermSpec, table: DataTable) -> ReMat:
    col = table[spec.grouping]
    if table.is_numeric(spec.grouping):
        raise DataError(f"numeric column {spec.grouping!r} used as grouping factor")
    levels, refs = np.unique(col, return_inverse=True)
    wide = _model_columns(table, spec.columns, "random-effects covariate")
    return ReMat(
        spec.grouping,
        refs.astype(np.intp),
        tuple(str(v) for v in levels),
        wide,
        spec.columns,
        spec.corr_mask.copy(),
    )


def build_matrices(
    ast: FormulaAST, specs: Sequence[TermSpec], table: DataTable
) -> tuple[XyMat, list[ReMat], ModelDims]:
    """Evaluate the fixed-effects matrix, response and per-factor structures."""
    y = _numeric(table, ast.response, "response")
    X = _model_columns(table, ast.fixed_terms, "fixed-effects covariate")
    names = tuple("(Intercept)" if t == INTERCEPT else t for t in ast.fixed_terms)
    xy = XyMat(np.column_stack([X, y]), names + (ast.response,))
    remats = [build_remat(s, table) for s in specs]
    dims = ModelDims(
        n=table.nrows,
        p=xy.p,
        k=len(remats),
        p_i=tuple(r.p for r in remats),
        ell_i=tuple(r.nlevels for r in remats),
    )
    return xy, remats, dims
