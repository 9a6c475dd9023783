"""Relative covariance factor held as per-term lower-triangular templates.

The full factor is block diagonal with ``nlevels`` copies of each term's
``p x p`` template; it is never formed.  Multiplication by it is done
block by block from the template alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .blocks import Block, BlockDiagonalBlock, DenseBlock, DiagonalBlock, SparseBlock


class ThetaError(ValueError):
    pass


class Template:
    """Lower-triangular ``p x p`` template; only ``mask`` entries are free."""

    def __init__(self, mask: np.ndarray):
        mask = np.tril(np.asarray(mask, dtype=bool))
        self.mask = mask
        self.values = np.zeros(mask.shape)
        # free entries in column-major order over the lower triangle
        rows, cols = np.nonzero(mask.T)
        self.free_rows, self.free_cols = cols, rows

    @property
    def p(self) -> int:
        return self.mask.shape[0]

    @property
    def n_theta(self) -> int:
        return len(self.free_rows)

    def is_diagonal_entry(self) -> np.ndarray:
        return self.free_rows == self.free_cols

    def __repr__(self) -> str:
        return f"Template({self.values.tolist()})"


@dataclass
class ThetaMap:
    offsets: tuple[int, ...]
    counts: tuple[int, ...]
    lower: np.ndarray

    @property
    def size(self) -> int:
        return len(self.lower)

    def slices(self) -> list[slice]:
        return [slice(o, o + c) for o, c in zip(self.offsets, self.counts)]


def make_templates(masks: Sequence[np.ndarray]) -> tuple[list[Template], ThetaMap]:
    templates = [Template(m) for m in masks]
    offsets, counts, lower = [], [], []
    off = 0
    for t in templates:
        offsets.append(off)
        counts.append(t.n_theta)
        lower.append(np.where(t.is_diagonal_entry(), 0.0, -np.inf))
        off += t.n_theta
    lb = np.concatenate(lower) if lower else np.empty(0)
    return templates, ThetaMap(tuple(offsets), tuple(counts), lb)


def initial_theta(tmap: ThetaMap) -> np.ndarray:
    """Ones for diagonal template entries, zeros for the others."""
    return np.where(tmap.lower == 0.0, 1.0, 0.0)


def set_theta(templates: Sequence[Template], tmap: ThetaMap, theta) -> None:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (tmap.size,):
        raise ThetaError(f"theta has length {theta.size}, expected {tmap.size}")
    if np.any(theta < tmap.lower):
        bad = int(np.argmax(theta < tmap.lower))
        raise ThetaError(f"theta[{bad}] = {theta[bad]} is below its lower bound 0")
    for t, sl in zip(templates, tmap.slices()):
        t.values[t.free_rows, t.free_cols] = theta[sl]


def get_theta(templates: Sequence[Template]) -> np.ndarray:
    parts = [t.values[t.free_rows, t.free_cols] for t in templates]
    return np.concatenate(parts) if parts else np.empty(0)


def _check(n: int, p: int, what: str) -> None:
    if n % p:
        raise ThetaError(f"block {what} count {n} is not a multiple of template size {p}")


def scale_block_left(template: Template, block: Block) -> Block:
    """In place ``block <- Lambda_i' block``; returns ``block``."""
    T = template.values
    p = template.p
    _check(block.shape[0], p, "row")
    if isinstance(block, DiagonalBlock):
        if p != 1:
            raise ThetaError("diagonal block requires a scalar template")
        block.d *= T[0, 0]
    elif isinstance(block, BlockDiagonalBlock):
        block.tiles[...] = np.matmul(T.T, block.tiles)
    elif isinstance(block, SparseBlock):
        if p == 1:
            block.data *= T[0, 0]
        else:
            idx = block.tile_idx
            block.data[idx] = np.matmul(T.T, block.data[idx])
    elif isinstance(block, DenseBlock):
        if p == 1:
            block.a *= T[0, 0]
        else:
            a = block.a.reshape(-1, p, block.shape[1])
            a[...] = np.matmul(T.T, a)
    else:
        raise TypeError(type(block).__name__)
    return block


def scale_block_right(block: Block, template: Template) -> Block:
    """In place ``block <- block Lambda_j``; returns ``block``."""
    T = template.values
    p = template.p
    _check(block.shape[1], p, "column")
    if isinstance(block, DiagonalBlock):
        if p != 1:
            raise ThetaError("diagonal block requires a scalar template")
        block.d *= T[0, 0]
    elif isinstance(block, BlockDiagonalBlock):
        block.tiles[...] = np.matmul(block.tiles, T)
    elif isinstance(block, SparseBlock):
        if p == 1:
            block.data *= T[0, 0]
        else:
            idx = block.tile_idx
            block.data[idx] = np.matmul(block.data[idx], T)
    elif isinstance(block, DenseBlock):
        if p == 1:
            block.a *= T[0, 0]
        else:
            a = block.a.reshape(block.shape[0], -1, p)
            a[...] = np.matmul(a, T)
    else:
        raise TypeError(type(block).__name__)
    return block


def dense_lambda(templates: Sequence[Template], nlevels: Sequence[int]) -> np.ndarray:
    """Materialize the full factor.  For tests and small problems only."""
    blocks = [np.kron(np.eye(ell), t.values) for t, ell in zip(templates, nlevels)]
    q = sum(b.shape[0] for b in blocks)
    out = np.zeros((q, q))
    off = 0
    for b in blocks:
        m = b.shape[0]
        out[off : off + m, off : off + m] = b
        off += m
    return out
