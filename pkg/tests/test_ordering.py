import time

from blockedlmm import INSTEVAL_FORMULA, LinearMixedModel

THETA_HAT = [0.2757269709081104, 0.4352906455775487, 0.04315999320792337, 0.12997785126273184]


def _theta_for(model):
    # theta follows the model's term order
    by_group = {"s": THETA_HAT[:1], "d": THETA_HAT[1:2], "dept": THETA_HAT[2:]}
    return [v for r in model.reterms for v in by_group[r.grouping]]


def _min_eval_time(model, reps=5):
    theta = _theta_for(model)
    model.evaluate(theta)
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        model.evaluate(theta)
        best = min(best, time.perf_counter() - t0)
    return best


def test_formula_order_is_much_slower(insteval_model, insteval):
    swapped = LinearMixedModel(INSTEVAL_FORMULA, insteval, sort=False)
    fast = _min_eval_time(insteval_model)
    slow = _min_eval_time(swapped)
    assert slow / fast > 5
    # same model, same objective
    assert abs(swapped.objective() - insteval_model.objective()) <= 1e-6 * insteval_model.objective()
