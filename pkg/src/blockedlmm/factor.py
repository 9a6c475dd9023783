"""Blocked lower Cholesky factor of Omega(theta) and the profiled objectives.

``update_L`` walks the block columns left to right.  For each column it
copies the blocks of ``A``, scales them by the relative covariance
templates, inflates the random-effects diagonal block by the identity,
subtracts the contributions of the columns already factored, factors the
diagonal block and finally solves the blocks below it.
"""

from __future__ import annotations

import math
import warnings
from typing import TYPE_CHECKING, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.linalg import lapack

from .blocks import Block, BlockDiagonalBlock, DenseBlock, DiagonalBlock, SparseBlock
from .gram import GramBlocks
from .relcov import scale_block_left, scale_block_right, set_theta

if TYPE_CHECKING:
    from .model import LinearMixedModel

PIVOT_FLOOR = 1e-13
# above this many index pairs the symmetric sparse update falls back to
# a sparse-sparse product
MAX_PAIRS = 60_000_000


class FactorizationError(ArithmeticError):
    """A non-positive pivot was met while factoring a diagonal block."""


class StaleFactorError(RuntimeError):
    """The factor does not correspond to the installed parameter vector."""


class PerfectFitWarning(RuntimeWarning):
    pass


class _SparseSyrk:
    """Lower triangle of ``S S'`` for a fixed-pattern sparse ``S``.

    Each column of ``S`` contributes the products of all pairs of its
    stored entries.  The pairs are enumerated once and grouped by target
    position, so an update is a gather, a multiply and a segmented sum.
    """

    def __init__(self, S: SparseBlock):
        mat = S.mat
        m = mat.shape[0]
        starts = mat.indptr[:-1]
        col_start = np.repeat(starts, np.diff(mat.indptr))
        counts = np.arange(mat.nnz) - col_start + 1
        total = int(counts.sum())
        pa = np.repeat(np.arange(mat.nnz), counts)
        first = np.repeat(np.cumsum(counts) - counts, counts)
        pb = np.repeat(col_start, counts) + (np.arange(total) - first)
        rows = mat.indices
        flat = rows[pa].astype(np.int64) * m + rows[pb]
        order = np.argsort(flat, kind="stable")
        flat = flat[order]
        self.pa = pa[order]
        self.pb = pb[order]
        boundary = np.flatnonzero(np.diff(flat)) + 1
        self.starts = np.concatenate([[0], boundary])
        self.targets = flat[self.starts]
        self.npairs = total

    def apply(self, S: SparseBlock, target: np.ndarray) -> None:
        d = S.data
        w = d[self.pa] * d[self.pb]
        target.ravel()[self.targets] -= np.add.reduceat(w, self.starts)


def _pair_count(S: SparseBlock) -> int:
    c = np.diff(S.mat.indptr).astype(np.int64)
    return int((c * (c + 1) // 2).sum())


def allocate_L(A: GramBlocks) -> GramBlocks:
    """Storage for the factor, fixed for the life of the model.

    The first block column keeps the structure of ``A``; every later
    block is dense because it fills in.
    """
    blocks: list[list[Block]] = []
    for i in range(A.nblocks):
        row: list[Block] = []
        for j in range(i + 1):
            a = A[i, j]
            if j == 0:
                if isinstance(a, DiagonalBlock):
                    row.append(DiagonalBlock(a.d.copy()))
                elif isinstance(a, BlockDiagonalBlock):
                    row.append(BlockDiagonalBlock(a.tiles.copy()))
                elif isinstance(a, SparseBlock):
                    row.append(SparseBlock(a.mat.copy(), a.rgroup, a.cgroup))
                else:
                    row.append(DenseBlock(np.zeros(a.shape), symmetric=(i == j)))
            else:
                row.append(DenseBlock(np.zeros(a.shape), symmetric=(i == j)))
        blocks.append(row)
    return GramBlocks(blocks, A.names, A.sizes)


def _subtract_product(target: DenseBlock, X: Block, Y: Block, syrk: _SparseSyrk | None) -> None:
    """``target -= X Y'`` with a kernel chosen by the storage of ``X`` and ``Y``."""
    t = target.a
    if isinstance(X, SparseBlock):
        if X is Y and syrk is not None:
            syrk.apply(X, t)
        elif isinstance(Y, SparseBlock):
            t -= (X.mat @ Y.mat.T).toarray()
        else:
            t -= X.mat @ Y.a.T
    elif isinstance(Y, SparseBlock):
        t -= (Y.mat @ X.a.T).T
    else:
        t -= X.a @ Y.a.T


def _chol_dense_inplace(a: np.ndarray, what: str) -> None:
    scale = float(np.max(np.abs(np.diag(a)))) if a.size else 0.0
    # the C-ordered lower triangle is the upper triangle of the transpose
    c, info = lapack.dpotrf(a.T, lower=0, clean=1, overwrite_a=1)
    if info != 0:
        raise FactorizationError(f"non-positive pivot {info} in block {what}")
    if c is not a.T and not np.shares_memory(c, a):
        a[...] = c.T
    if a.size and np.min(np.diag(a)) ** 2 < PIVOT_FLOOR * scale:
        raise FactorizationError(f"pivot below floor in block {what}")


def _factor_diag(block: Block, what: str) -> None:
    if isinstance(block, DiagonalBlock):
        if np.any(block.d <= 0):
            raise FactorizationError(f"non-positive pivot in block {what}")
        np.sqrt(block.d, out=block.d)
    elif isinstance(block, BlockDiagonalBlock):
        try:
            block.tiles[...] = np.linalg.cholesky(block.tiles)
        except np.linalg.LinAlgError:
            raise FactorizationError(f"non-positive pivot in block {what}") from None
    else:
        _chol_dense_inplace(block.a, what)


def _rdiv_lower_t(block: Block, Ljj: Block) -> None:
    """``block <- block Ljj^{-T}``."""
    if isinstance(Ljj, DiagonalBlock):
        if isinstance(block, SparseBlock):
            block.data /= Ljj.d[block.col_of_nz]
        else:
            block.a /= Ljj.d[None, :]
    elif isinstance(Ljj, BlockDiagonalBlock):
        inv_t = np.linalg.inv(Ljj.tiles).transpose(0, 2, 1)
        if isinstance(block, SparseBlock):
            idx = block.tile_idx
            block.data[idx] = np.matmul(block.data[idx], inv_t[block.tile_col])
        else:
            p = Ljj.p
            a = block.a.reshape(block.shape[0], -1, p)
            a[...] = np.einsum("rlb,lba->rla", a, inv_t)
    else:
        block.a[...] = sla.solve_triangular(
            Ljj.a, block.a.T, lower=True, check_finite=False
        ).T


def _factor_xy(block: DenseBlock, p: int) -> bool:
    """Factor the ``[X y]`` diagonal block.  Returns False on a perfect fit."""
    a = block.a
    if p:
        Xpart = a[:p, :p]
        scale = float(np.max(np.abs(np.diag(Xpart))))
        try:
            LXX = np.linalg.cholesky(np.tril(Xpart) + np.tril(Xpart, -1).T)
        except np.linalg.LinAlgError:
            raise FactorizationError("fixed-effects model matrix is rank deficient") from None
        if np.min(np.diag(LXX)) ** 2 < PIVOT_FLOOR * max(scale, 1.0):
            raise FactorizationError("fixed-effects model matrix is rank deficient")
        Xpart[...] = LXX
        a[p, :p] = sla.solve_triangular(LXX, a[p, :p], lower=True, check_finite=False)
    r2 = a[p, p] - float(a[p, :p] @ a[p, :p])
    if r2 <= 1e-14 * max(abs(a[p, p]), np.finfo(float).tiny):
        a[p, p] = 0.0
        return False
    a[p, p] = math.sqrt(r2)
    return True


class FactorState:
    """Cached symbolic information for the update of one model's factor."""

    def __init__(self, A: GramBlocks, L: GramBlocks):
        self.syrk: dict[tuple[int, int], _SparseSyrk | None] = {}
        for i in range(1, L.nblocks):
            for c in range(i):
                X = L[i, c]
                if isinstance(X, SparseBlock):
                    self.syrk[(i, c)] = _SparseSyrk(X) if _pair_count(X) <= MAX_PAIRS else None


def update_L(model: "LinearMixedModel", theta: Sequence[float] | None = None) -> GramBlocks:
    """Install ``theta`` (if given) and recompute the blocked factor in place."""
    if theta is not None:
        set_theta(model.templates, model.tmap, theta)
    A, L = model.A, model.L
    templates = model.templates
    k = len(templates)
    state = model._factor_state
    model._L_valid = False
    for j in range(k + 1):
        for i in range(j, k + 1):
            Lij = L[i, j]
            Lij.copy_from(A[i, j])
            if i < k:
                scale_block_left(templates[i], Lij)
            if j < k:
                scale_block_right(Lij, templates[j])
            if i == j < k:
                if isinstance(Lij, DiagonalBlock):
                    Lij.d += 1.0
                elif isinstance(Lij, BlockDiagonalBlock):
                    Lij.tiles += np.eye(Lij.p)
                else:
                    Lij.a[np.diag_indices_from(Lij.a)] += 1.0
            for c in range(j):
                syrk = state.syrk.get((i, c)) if i == j else None
                _subtract_product(Lij, L[i, c], L[j, c], syrk)
        if j < k:
            _factor_diag(L[j, j], f"[{j + 1},{j + 1}]")
            for i in range(j + 1, k + 1):
                _rdiv_lower_t(L[i, j], L[j, j])
        else:
            model._perfect_fit = not _factor_xy(L[k, k], model.dims.p)
    model._L_valid = True
    return L


def _check_current(model: "LinearMixedModel") -> None:
    if not model._L_valid:
        raise StaleFactorError("update_L has not been run for the installed theta")


def logdet_RZZ(model: "LinearMixedModel") -> float:
    """``log |R_ZZ|``, accumulated as a sum of logs."""
    _check_current(model)
    total = 0.0
    L = model.L
    for j in range(len(model.templates)):
        b = L[j, j]
        if isinstance(b, DiagonalBlock):
            total += float(np.sum(np.log(b.d)))
        elif isinstance(b, BlockDiagonalBlock):
            total += float(np.sum(np.log(np.diagonal(b.tiles, axis1=1, axis2=2))))
        else:
            total += float(np.sum(np.log(np.diag(b.a))))
    return total


def logdet_RXX(model: "LinearMixedModel") -> float:
    _check_current(model)
    p = model.dims.p
    return float(np.sum(np.log(np.diag(model.L[-1, -1].a)[:p]))) if p else 0.0


def ryy(model: "LinearMixedModel") -> float:
    _check_current(model)
    return float(model.L[-1, -1].a[-1, -1])


def pwrss(model: "LinearMixedModel") -> float:
    """Penalized residual sum of squares at the conditional estimates."""
    return ryy(model) ** 2


def _deviance(logdet: float, r2: float, dof: int, perfect: bool) -> float:
    if perfect or r2 <= 0.0:
        warnings.warn("residual sum of squares is zero (perfect fit)", PerfectFitWarning, stacklevel=3)
        return math.inf
    return 2.0 * logdet + dof * (1.0 + math.log(2.0 * math.pi * r2 / dof))


def objective(model: "LinearMixedModel") -> float:
    """Negative twice the profiled log-likelihood, from the factor alone."""
    return _deviance(logdet_RZZ(model), pwrss(model), model.dims.n, model._perfect_fit)


def objective_reml(model: "LinearMixedModel") -> float:
    """REML criterion on the deviance scale."""
    n, p = model.dims.n, model.dims.p
    if p >= n:
        raise ValueError(f"REML requires p < n (p={p}, n={n})")
    logdet = logdet_RZZ(model) + logdet_RXX(model)
    return _deviance(logdet, pwrss(model), n - p, model._perfect_fit)


def nnz_L(model: "LinearMixedModel") -> int:
    return model.L.nnz


def footprint_bytes(model: "LinearMixedModel") -> int:
    """Bytes held by the blocks of ``A`` and ``L``."""
    return model.A.nbytes + model.L.nbytes


def dense_L(L: GramBlocks) -> np.ndarray:
    """Lower-triangular dense copy of the factor (small problems only)."""
    off = L.offsets()
    out = np.zeros((off[-1], off[-1]))
    for i, j, b in L:
        out[off[i] : off[i + 1], off[j] : off[j + 1]] = b.to_dense()
    return out


def as_sparse(b: Block) -> sp.csc_matrix:
    if isinstance(b, SparseBlock):
        return b.mat
    return sp.csc_matrix(b.to_dense())
