"""
Block structure and fill-in
===========================

The augmented Gram matrix of ``[Z X y]`` is stored as a lower-triangular
grid of blocks, one row and column per random-effects term plus one for
the fixed effects and response.  Each block keeps whatever structure it
has: diagonal, sparse, block diagonal or dense.
"""

from blockedlmm import INSTEVAL_FORMULA, LinearMixedModel, load_insteval

data = load_insteval()
model = LinearMixedModel(INSTEVAL_FORMULA, data)

# "Diag/Dense" marks a block that is diagonal in A but fills in within
# the Cholesky factor L.
print(model.block_description())
print(f"nnz(A) = {model.A.nnz:,}   nnz(L) = {model.nnz_L:,}")
print(f"footprint of A and L: {model.footprint_bytes / 2**20:.1f} MiB")

# Only 73421 of the 2972 x 1128 student/instructor cells are occupied,
# about 2 percent.
s_d = model.A[1, 0]
print(f"[2,1] block: {s_d.nnz} stored entries of {s_d.shape[0] * s_d.shape[1]:,}")

# Putting the instructors first instead makes the 2972 x 2972 student
# block fill in, about five times as many entries in L.
swapped = LinearMixedModel(INSTEVAL_FORMULA, data, sort=False)
print(swapped.block_description())
print(f"nnz(L) with instructors first = {swapped.nnz_L:,}")
