import numpy as np
import pytest

from blockedlmm import DataTable, LinearMixedModel
from blockedlmm.blocks import BlockTag, DiagonalBlock, SparseBlock
from blockedlmm.gram import DENSE_THRESHOLD, block_description, sort_terms
from helpers import random_instance

INSTEVAL_TABLE = """\
rows  s         d             dept           fixed
2972  Diagonal
1128  Sparse    Diag/Dense
28    Dense     Sparse/Dense  BlkDiag/Dense
3     Dense     Dense         Dense          Dense"""


def test_insteval_block_description(insteval_model):
    assert insteval_model.block_description() == INSTEVAL_TABLE
    assert "Sparse    Diag/Dense" in insteval_model.block_description()


def test_insteval_sort_order(insteval_model):
    assert [r.grouping for r in insteval_model.reterms] == ["s", "d", "dept"]


def test_insteval_distinct_pairs(insteval_model):
    # every (student, instructor) pair occurs once
    assert insteval_model.A[1, 0].nnz == 73421


def test_sort_stable_on_ties():
    t = DataTable.from_columns(
        {"y": np.arange(6.0), "a": list("aabbcc"), "b": list("xyzxyz"), "c": list("pqrpqq")}
    )
    m = LinearMixedModel("y ~ 1 + (1|a) + (1|b) + (1|c)", t)
    assert [r.grouping for r in m.reterms] == ["a", "b", "c"]
    m = LinearMixedModel("y ~ 1 + (1|c) + (1|b) + (1|a)", t)
    assert [r.grouping for r in m.reterms] == ["c", "b", "a"]
    assert sort_terms(m.reterms[:1]) == m.reterms[:1]


def test_toy_blocks():
    t = DataTable.from_columns({"y": [1.0, 2.0, 3.0, 4.0], "g": ["a", "a", "b", "b"]})
    m = LinearMixedModel("y ~ 1 + (1|g)", t)
    A = m.A
    assert isinstance(A[0, 0], DiagonalBlock) and list(A[0, 0].d) == [2, 2]
    # [X y]' Z: per-level sums of the intercept and the response
    assert np.array_equal(A[1, 0].a, [[2, 2], [3, 7]])
    assert m.block_description() == "rows  g         fixed\n2     Diagonal\n2     Dense     Dense"


def test_two_crossed_scalar_terms_fill():
    rng = np.random.default_rng(0)
    n = 400
    t = DataTable.from_columns(
        {
            "y": rng.standard_normal(n),
            "a": [f"a{i:03d}" for i in rng.integers(0, 200, n)],
            "b": [f"b{i:03d}" for i in rng.integers(0, 100, n)],
        }
    )
    m = LinearMixedModel("y ~ 1 + (1|a) + (1|b)", t)
    lines = m.block_description().splitlines()
    assert lines[2].split()[1:] == ["Sparse", "Diag/Dense"]
    assert m.A[1, 0].tag is BlockTag.SPARSE


@pytest.mark.parametrize("seed", range(40))
def test_dense_reconstruction(seed):
    inst = random_instance(seed)
    W = np.hstack([inst.Z, inst.X, inst.y[:, None]])
    A = inst.model.A.to_dense()
    assert np.allclose(A, W.T @ W, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max()))


@pytest.mark.parametrize("seed", range(40))
def test_tag_invariants(seed):
    m = random_instance(seed).model
    k = m.dims.k
    for i, r in enumerate(m.reterms):
        tag = m.A[i, i].tag
        assert tag is (BlockTag.DIAGONAL if r.p == 1 else BlockTag.BLOCKDIAG)
        for j in range(i):
            b = m.A[i, j]
            assert b.tag in (BlockTag.SPARSE, BlockTag.DENSE)
            if isinstance(b, SparseBlock):
                assert b.nnz <= m.dims.n * r.p * m.reterms[j].p
                density = b.nnz / (b.shape[0] * b.shape[1])
                assert density <= DENSE_THRESHOLD + 1e-12
    for j in range(k + 1):
        assert m.A[k, j].tag is BlockTag.DENSE


def test_block_bytes_sum(insteval_model):
    A = insteval_model.A
    assert sum(A.block_bytes().values()) == A.nbytes


def test_A_untouched_by_update(insteval_model):
    before = [b.to_dense().copy() if b.shape[0] * b.shape[1] < 1e6 else None for _, _, b in insteval_model.A]
    insteval_model.evaluate([0.3, 0.2, 0.1, 0.4])
    after = [b.to_dense() if b.shape[0] * b.shape[1] < 1e6 else None for _, _, b in insteval_model.A]
    for x, y in zip(before, after):
        if x is not None:
            assert np.array_equal(x, y)
    assert block_description(insteval_model.A).splitlines()[2].split()[1:] == ["Sparse", "Diagonal"]
