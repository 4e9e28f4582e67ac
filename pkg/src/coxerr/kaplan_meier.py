"""Product-limit estimator of the censor survival function.

The censor C is itself censored by the lifetime, so its survival function
is estimated from (Y_i, 1 - Delta_i) by the product-limit formula

    G_C(u) = prod_j ( N(Y_j) / (N(Y_j) + 1) )^{(1-Delta_j) 1{Y_j <= u}}

for u up to the largest observation, 0 beyond it, with N(u) the number of
observations strictly greater than u.  The formula needs no tie-breaking
rule (N counts strictly greater values), is order-independent, and is
evaluated as a right-continuous step function.
"""

import numpy as np

from coxerr.simulate import Dataset


class StepSurvival:
    """Right-continuous nonincreasing step function on [0, tau], 0 past y_max."""

    __slots__ = ("times", "post_values", "y_max")

    def __init__(self, times, post_values, y_max):
        self.times = np.asarray(times, dtype=np.float64)
        self.post_values = np.asarray(post_values, dtype=np.float64)
        self.y_max = float(y_max)

    def evaluate(self, u):
        u = np.asarray(u, dtype=np.float64)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        idx = np.searchsorted(self.times, u, side="right") - 1
        out = np.where(idx >= 0, self.post_values[np.clip(idx, 0, None)], 1.0)
        out = np.where(u > self.y_max, 0.0, out)
        return float(out[0]) if scalar else out

    def to_rows(self):
        return list(zip(self.times.tolist(), self.post_values.tolist()))


def km_censor(dataset: Dataset) -> StepSurvival:
    """Kaplan-Meier estimator of the censor survival from (Y, Delta)."""
    y = dataset.y
    delta = dataset.delta
    order = np.argsort(y, kind="stable")
    ys = y[order]
    ds = delta[order]
    n = ys.size

    # N(Y_j) = #{Y_i > Y_j}; ties share the same count
    bigger = n - np.searchsorted(ys, ys, side="right")
    factors = np.where(ds == 0, bigger / (bigger + 1.0), 1.0)

    uniq, first_idx = np.unique(ys, return_index=True)
    per_time = np.multiply.reduceat(factors, first_idx)
    values = np.cumprod(per_time)
    return StepSurvival(uniq, values, ys[-1])
