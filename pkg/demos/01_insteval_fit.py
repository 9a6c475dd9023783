"""
Fitting the InstEval ratings model
==================================

Students rated instructors' lectures on a 1 to 5 scale.  Both students
(``s``) and instructors (``d``) are grouping factors, and they are crossed:
most students rated several instructors.  A department-level intercept and
a department-level effect of ``service`` courses are added on top.
"""

from blockedlmm import INSTEVAL_FORMULA, LinearMixedModel, load_insteval

data = load_insteval()
print(f"{data.nrows} ratings")

# The two department terms share a grouping factor and become one model
# term with two uncorrelated columns.  Terms are ordered by size, so
# students come first.
model = LinearMixedModel(INSTEVAL_FORMULA, data)
print(model.dims)

# Optimize the profiled deviance over the four covariance parameters.
ml = model.fit()
print(ml.report())
print("theta:", ml.theta)
print("objective evaluations:", ml.n_evals)

# REML on a fresh model; the fixed-effects standard errors grow a little.
reml = LinearMixedModel(INSTEVAL_FORMULA, data).fit(reml=True)
print(reml.report())
for name, a, b in zip(ml.coef_names, ml.se, reml.se):
    print(f"{name:<12} SE  ML {a:.7f}   REML {b:.7f}")
