"""Blocked lower triangle of the augmented Gram matrix of ``[Z X y]``."""

from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .blocks import (
    Block,
    BlockDiagonalBlock,
    DenseBlock,
    DiagonalBlock,
    SparseBlock,
    symmetric_to_dense,
)
from .ingest import ReMat, XyMat

# off-diagonal random-effects blocks denser than this are stored dense
DENSE_THRESHOLD = 0.1


class GramBlocks:
    """Lower-triangular grid of blocks; ``blocks[i][j]`` for ``j <= i``.

    Indices ``0..k-1`` are the random-effects terms in model order and
    index ``k`` is the ``[X y]`` block.
    """

    def __init__(self, blocks: list[list[Block]], names: Sequence[str], sizes: Sequence[int]):
        self.blocks = blocks
        self.names = tuple(names)
        self.sizes = tuple(sizes)

    @property
    def nblocks(self) -> int:
        return len(self.blocks)

    def __getitem__(self, ij: tuple[int, int]) -> Block:
        i, j = ij
        if j > i:
            raise IndexError("only the lower triangle is stored")
        return self.blocks[i][j]

    def __iter__(self):
        for i, row in enumerate(self.blocks):
            for j, b in enumerate(row):
                yield i, j, b

    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])

    def to_dense(self) -> np.ndarray:
        """Full symmetric matrix."""
        off = self.offsets()
        out = np.zeros((off[-1], off[-1]))
        for i, j, b in self:
            if i == j:
                out[off[i] : off[i + 1], off[j] : off[j + 1]] = symmetric_to_dense(b)
            else:
                d = b.to_dense()
                out[off[i] : off[i + 1], off[j] : off[j + 1]] = d
                out[off[j] : off[j + 1], off[i] : off[i + 1]] = d.T
        return out

    @property
    def nnz(self) -> int:
        return sum(b.nnz for _, _, b in self)

    def block_bytes(self) -> dict[tuple[int, int], int]:
        return {(i, j): b.nbytes for i, j, b in self}

    @property
    def nbytes(self) -> int:
        return sum(b.nbytes for _, _, b in self)


def sort_terms(remats: Sequence[ReMat]) -> list[ReMat]:
    """Order terms by decreasing number of random effects (stable)."""
    return sorted(remats, key=lambda r: -r.q)


def _sparse_Z(r: ReMat) -> sp.csc_matrix:
    n, p = r.n, r.p
    rows = np.repeat(np.arange(n), p)
    cols = (r.refs[:, None] * p + np.arange(p)).ravel()
    return sp.csc_matrix((r.wide.ravel(), (rows, cols)), shape=(n, r.q))


def _diag_block(r: ReMat) -> Block:
    if r.refs.size and (r.refs.min() < 0 or r.refs.max() >= r.nlevels):
        raise ValueError(f"level index out of range for {r.grouping!r}")
    if r.p == 1:
        return DiagonalBlock(np.bincount(r.refs, weights=r.wide[:, 0] ** 2, minlength=r.nlevels))
    tiles = np.zeros((r.nlevels, r.p, r.p))
    np.add.at(tiles, r.refs, r.wide[:, :, None] * r.wide[:, None, :])
    return BlockDiagonalBlock(tiles)


def _cross_block(ri: ReMat, rj: ReMat) -> Block:
    """``Z_i' Z_j`` with the pattern given by co-occurring level pairs."""
    pi, pj = ri.p, rj.p
    # one structural tile per distinct (level_i, level_j) pair
    key = ri.refs.astype(np.int64) * rj.nlevels + rj.refs
    uniq, inv = np.unique(key, return_inverse=True)
    vals = np.zeros((len(uniq), pi, pj))
    np.add.at(vals, inv, ri.wide[:, :, None] * rj.wide[:, None, :])
    li, lj = np.divmod(uniq, rj.nlevels)
    rows = (li[:, None, None] * pi + np.arange(pi)[None, :, None]).repeat(pj, axis=2)
    cols = (lj[:, None, None] * pj + np.arange(pj)[None, None, :]).repeat(pi, axis=1)
    shape = (ri.q, rj.q)
    if len(uniq) > DENSE_THRESHOLD * ri.nlevels * rj.nlevels:
        dense = np.zeros(shape)
        dense[rows.ravel(), cols.ravel()] = vals.ravel()
        return DenseBlock(dense)
    # csc built directly so explicit zeros stay in the pattern
    order = np.lexsort((rows.ravel(), cols.ravel()))
    r_sorted = rows.ravel()[order]
    c_sorted = cols.ravel()[order]
    indptr = np.zeros(shape[1] + 1, dtype=np.int64)
    np.add.at(indptr, c_sorted + 1, 1)
    indptr = np.cumsum(indptr)
    mat = sp.csc_matrix((vals.ravel()[order], r_sorted, indptr), shape=shape)
    return SparseBlock(mat, pi, pj)


def assemble_A(remats: Sequence[ReMat], xy: XyMat) -> GramBlocks:
    """Assemble the blocks of ``A`` for terms in the given order."""
    k = len(remats)
    blocks: list[list[Block]] = []
    for i, ri in enumerate(remats):
        row: list[Block] = [_cross_block(ri, remats[j]) for j in range(i)]
        row.append(_diag_block(ri))
        blocks.append(row)
    last: list[Block] = []
    for r in remats:
        last.append(DenseBlock(np.asarray((_sparse_Z(r).T @ xy.xy).T)))
    last.append(DenseBlock(xy.xy.T @ xy.xy, symmetric=True))
    blocks.append(last)
    names = [r.grouping for r in remats] + ["fixed"]
    sizes = [r.q for r in remats] + [xy.xy.shape[1]]
    assert len(blocks) == k + 1
    return GramBlocks(blocks, names, sizes)


def block_description(A: GramBlocks, L: GramBlocks | None = None) -> str:
    """Fixed-width table of block structures, ``A-tag/L-tag`` where they differ."""
    header = ["rows", *A.names]
    rows = []
    for i in range(A.nblocks):
        cells = [str(A.sizes[i])]
        for j in range(A.nblocks):
            if j > i:
                cells.append("")
                continue
            ta = A[i, j].tag
            tl = L[i, j].tag if L is not None else ta
            cells.append(ta.value if ta is tl else f"{ta.short}/{tl.short}")
        rows.append(cells)
    widths = [max(len(r[c]) for r in [header, *rows]) for c in range(len(header))]
    lines = []
    for r in [header, *rows]:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    return "\n".join(lines)
