"""
Checking the blocked factor against dense algebra
=================================================

For a small simulated data set every quantity can also be computed from
the n x n marginal covariance.  The two routes should agree to rounding.
"""

import numpy as np

from blockedlmm import LinearMixedModel, crossed_design
from blockedlmm.factor import dense_L
from blockedlmm.fit import conditional_modes, fixed_effects
from blockedlmm.reference import dense_objective, dense_omega_chol, dense_pls

data = crossed_design(150, 12, 6, seed=4)
model = LinearMixedModel("y ~ 1 + x + (1 + x | a) + (1 | b)", data)
theta = np.array([0.8, 0.2, 0.5, 0.6])
model.update_L(theta)

X, y, Z, Lam = model.xy.X, model.xy.y, model.dense_Z(), model.dense_lambda()
print("deviance  blocked", model.objective(), " dense", dense_objective(X, y, Z, Lam))
print("REML      blocked", model.objective(reml=True), " dense", dense_objective(X, y, Z, Lam, reml=True))
print("max |L difference|", np.abs(dense_L(model.L) - dense_omega_chol(model.A.to_dense(), Lam)).max())

beta, _ = fixed_effects(model)
pls = dense_pls(X, y, Z, Lam)
u = np.concatenate([m.ravel() for m in conditional_modes(model, spherical=True)])
print("beta      blocked", beta, " dense", pls.beta)
print("max |u difference|", np.abs(u - pls.u).max())
