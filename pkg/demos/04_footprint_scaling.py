"""
Memory footprint with two crossed factors
=========================================

With two crossed scalar terms the second diagonal block of L is dense,
so its size grows with the square of the smaller factor's level count.
The number of observations only enters through the sparse [2,1] block.
"""

from blockedlmm import LinearMixedModel, crossed_design

formula = "y ~ 1 + x + (1|a) + (1|b)"
print(f"{'n':>7} {'levels a':>9} {'levels b':>9} {'MiB':>8}")
for n, la, lb in [(20_000, 5_000, 500), (20_000, 5_000, 1_000), (20_000, 5_000, 2_000), (40_000, 5_000, 2_000)]:
    model = LinearMixedModel(formula, crossed_design(n, la, lb, seed=1))
    print(f"{n:>7} {la:>9} {lb:>9} {model.footprint_bytes / 2**20:>8.2f}")
