"""
What the term order costs per evaluation
========================================

Both orderings describe the same model, so the deviance at a given
parameter vector agrees.  The time per evaluation does not.
"""

import time

import numpy as np

from blockedlmm import INSTEVAL_FORMULA, LinearMixedModel, load_insteval

data = load_insteval()
sorted_model = LinearMixedModel(INSTEVAL_FORMULA, data)
formula_order = LinearMixedModel(INSTEVAL_FORMULA, data, sort=False)

theta = {"s": [0.2757], "d": [0.4353], "dept": [0.0432, 0.1300]}


def timed(model, reps=10):
    th = [v for r in model.reterms for v in theta[r.grouping]]
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        value = model.evaluate(th)
        times.append(time.perf_counter() - t0)
    return value, np.median(times)


for label, model in [("sorted", sorted_model), ("formula order", formula_order)]:
    value, t = timed(model)
    print(f"{label:<14} deviance {value:.4f}   median {1e3 * t:8.2f} ms per evaluation")
