"""Storage types for the blocks of the augmented Gram matrix and its factor.

Rows and columns of a block belonging to a random-effects term come in
runs of ``p`` consecutive entries per level of the grouping factor
(``rgroup``/``cgroup``).  The fixed-effects/response block uses a group
size of 1.
"""

from __future__ import annotations

import enum

import numpy as np
import scipy.sparse as sp


class BlockTag(enum.Enum):
    DIAGONAL = "Diagonal"
    SPARSE = "Sparse"
    DENSE = "Dense"
    BLOCKDIAG = "BlkDiag"

    @property
    def short(self) -> str:
        return "Diag" if self is BlockTag.DIAGONAL else self.value


class Block:
    tag: BlockTag
    shape: tuple[int, int]

    def to_dense(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def nnz(self) -> int:
        raise NotImplementedError

    @property
    def nbytes(self) -> int:
        raise NotImplementedError


class DiagonalBlock(Block):
    tag = BlockTag.DIAGONAL

    def __init__(self, d: np.ndarray):
        self.d = np.ascontiguousarray(d, dtype=np.float64)
        self.shape = (len(self.d), len(self.d))

    def to_dense(self) -> np.ndarray:
        return np.diag(self.d)

    @property
    def nnz(self) -> int:
        return len(self.d)

    @property
    def nbytes(self) -> int:
        return self.d.nbytes

    def copy_from(self, other: "DiagonalBlock") -> None:
        self.d[:] = other.d


class BlockDiagonalBlock(Block):
    """``nlevels`` dense ``p x p`` tiles along the diagonal."""

    tag = BlockTag.BLOCKDIAG

    def __init__(self, tiles: np.ndarray):
        self.tiles = np.ascontiguousarray(tiles, dtype=np.float64)
        m = self.tiles.shape[0] * self.tiles.shape[1]
        self.shape = (m, m)

    @property
    def p(self) -> int:
        return self.tiles.shape[1]

    def to_dense(self) -> np.ndarray:
        return sp.block_diag(list(self.tiles), format="csr").toarray()

    @property
    def nnz(self) -> int:
        # symmetric tiles: lower triangle is what a factor would hold
        ell, p, _ = self.tiles.shape
        return ell * p * (p + 1) // 2

    @property
    def nbytes(self) -> int:
        return self.tiles.nbytes

    def copy_from(self, other: "BlockDiagonalBlock") -> None:
        self.tiles[...] = other.tiles


class SparseBlock(Block):
    """Compressed-column block with a fixed, tile-complete pattern.

    Every stored ``rgroup x cgroup`` tile is stored in full (explicit zeros
    included), so that scaling by per-level templates never changes the
    pattern.  ``tile_idx[t, a, b]`` is the position in ``data`` of entry
    ``(a, b)`` of tile ``t``.
    """

    tag = BlockTag.SPARSE

    def __init__(self, mat: sp.csc_matrix, rgroup: int = 1, cgroup: int = 1):
        mat = sp.csc_matrix(mat)
        mat.sort_indices()
        self.mat = mat
        # alias of mat.data; updated in place only
        self.data = mat.data
        self.shape = mat.shape
        self.rgroup = rgroup
        self.cgroup = cgroup
        self.col_of_nz = np.repeat(np.arange(mat.shape[1]), np.diff(mat.indptr))
        rows = mat.indices
        cols = self.col_of_nz
        tile_key = (rows // rgroup) * (mat.shape[1] // cgroup) + cols // cgroup
        uniq, tile_id = np.unique(tile_key, return_inverse=True)
        if len(uniq) * rgroup * cgroup != mat.nnz:
            raise ValueError("sparse block pattern is not tile-complete")
        self.tile_idx = np.empty((len(uniq), rgroup, cgroup), dtype=np.intp)
        self.tile_idx[tile_id, rows % rgroup, cols % cgroup] = np.arange(mat.nnz)
        self.tile_col = uniq % (mat.shape[1] // cgroup)

    def to_dense(self) -> np.ndarray:
        return self.mat.toarray()

    @property
    def nnz(self) -> int:
        return self.mat.nnz

    @property
    def nbytes(self) -> int:
        return self.mat.data.nbytes + self.mat.indices.nbytes + self.mat.indptr.nbytes

    def copy_from(self, other: "SparseBlock") -> None:
        self.data[:] = other.data


class DenseBlock(Block):
    """Dense storage.  ``symmetric`` marks diagonal blocks, of which only
    the lower triangle carries information."""

    tag = BlockTag.DENSE

    def __init__(self, a: np.ndarray, symmetric: bool = False):
        self.a = np.ascontiguousarray(a, dtype=np.float64)
        self.shape = self.a.shape
        self.symmetric = symmetric

    def to_dense(self) -> np.ndarray:
        if self.symmetric:
            return np.tril(self.a)
        return self.a.copy()

    @property
    def nnz(self) -> int:
        m, n = self.shape
        return m * (m + 1) // 2 if self.symmetric else m * n

    @property
    def nbytes(self) -> int:
        return self.a.nbytes

    def copy_from(self, other: Block) -> None:
        if isinstance(other, DenseBlock):
            self.a[...] = other.a
        elif isinstance(other, DiagonalBlock):
            self.a.fill(0.0)
            np.fill_diagonal(self.a, other.d)
        elif isinstance(other, BlockDiagonalBlock):
            self.a.fill(0.0)
            ell, p, _ = other.tiles.shape
            view = self.a.reshape(ell, p, ell, p)
            idx = np.arange(ell)
            view[idx, :, idx, :] = other.tiles
        elif isinstance(other, SparseBlock):
            self.a.fill(0.0)
            self.a[other.mat.indices, other.col_of_nz] = other.mat.data
        else:
            raise TypeError(f"cannot copy {type(other).__name__} into a dense block")


def symmetric_to_dense(block: Block) -> np.ndarray:
    """Full symmetric matrix from a diagonal block of the Gram matrix."""
    if isinstance(block, DenseBlock) and block.symmetric:
        low = np.tril(block.a)
        return low + np.tril(low, -1).T
    return block.to_dense()
