"""Corrected partial log-likelihood and its derivatives.

Per record the contribution is

    q(Y, D, W; lam, b) = D (log lam(Y) + b'W) - exp(b'W) / M(b) * int_0^Y lam

where M is the error MGF; dividing the classical risk term by M(b) removes
the bias that W = X + U would otherwise introduce (for error "none" this is
exactly the classical surrogate with W in place of X).  The objective is the
sample mean of q.

Records with D = 1 and lam(Y) <= 0 contribute -inf; the optimizer treats
-inf as infeasible, which keeps its line search total.

Integrals int_0^Y use the exact quadrature of the piecewise-linear hazard:
each record gets a row of hat-basis integrals H[i, j] = int_0^{Y_i} phi_j,
so cumulative hazards, their lambda-gradients, and the objective are plain
matrix products.  Rows depend only on (Y_i, grid), so the matrix is cached
on the context per grid geometry.
"""

import math

import numpy as np

from coxerr.error_models import ErrorModel, mgf
from coxerr.hazard_grid import GridFunction
from coxerr.simulate import Dataset


def hat_integrals(y, tau, grid_size):
    """Rows of int_0^{y_i} phi_j(u) du for the hat basis on the grid."""
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    g = grid_size
    h = tau / g
    k = np.minimum((y / h).astype(np.int64), g - 1)
    frac = y / h - k

    cols = np.arange(g + 1)
    out = h * (cols[None, :] < k[:, None])
    out[:, 0] *= 0.5
    rows = np.arange(n)
    out[rows, k] += 0.5 * h * (k > 0)
    out[rows, k] += h * (frac - 0.5 * frac * frac)
    out[rows, k + 1] += 0.5 * h * frac * frac
    return out


def hat_values(y, tau, grid_size):
    """(cell index, fraction) so that f(y_i) = (1-frac) v[k] + frac v[k+1]."""
    y = np.asarray(y, dtype=np.float64)
    h = tau / grid_size
    k = np.minimum((y / h).astype(np.int64), grid_size - 1)
    return k, y / h - k


class LikelihoodContext:
    """Dataset + error model + beta box, with per-grid cached quadrature."""

    def __init__(self, dataset: Dataset, error: ErrorModel, beta_lo, beta_hi):
        if dataset.n == 0:
            raise ValueError("dataset must be nonempty")
        beta_lo = np.atleast_1d(np.asarray(beta_lo, dtype=np.float64))
        beta_hi = np.atleast_1d(np.asarray(beta_hi, dtype=np.float64))
        if beta_lo.shape != beta_hi.shape or np.any(beta_lo >= beta_hi):
            raise ValueError("beta box must have nonempty interior")
        if beta_lo.size != dataset.dim or error.dim != dataset.dim:
            raise ValueError("dataset, error model and beta box disagree on dimension")
        self.dataset = dataset
        self.error = error
        self.beta_lo = beta_lo
        self.beta_hi = beta_hi
        self._grid_cache = {}

    @property
    def n(self):
        return self.dataset.n

    @property
    def dim(self):
        return self.dataset.dim

    def grid_data(self, tau, grid_size):
        key = (float(tau), int(grid_size))
        cached = self._grid_cache.get(key)
        if cached is None:
            y = self.dataset.y
            k, frac = hat_values(y, tau, grid_size)
            cached = {
                "H": hat_integrals(y, tau, grid_size),
                "k": k,
                "frac": frac,
            }
            self._grid_cache[key] = cached
        return cached

    def lam_at_events(self, lam: GridFunction):
        gd = self.grid_data(lam.tau, lam.grid_size)
        k, frac = gd["k"], gd["frac"]
        v = lam.values
        return v[k] * (1.0 - frac) + v[k + 1] * frac

    def cum_at_records(self, lam: GridFunction):
        return self.grid_data(lam.tau, lam.grid_size)["H"] @ lam.values


def q_single(y, delta, w, lam: GridFunction, beta, error: ErrorModel) -> float:
    """One record's corrected log-likelihood term (-inf if log-infeasible)."""
    w = np.atleast_1d(np.asarray(w, dtype=np.float64))
    beta = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    lam_y = lam.evaluate(y)
    risk = math.exp(float(beta @ w)) / mgf(error, beta)
    integral = lam.cumulative(y)
    if delta:
        if lam_y <= 0.0:
            return -math.inf
        return math.log(lam_y) + float(beta @ w) - risk * integral
    return -risk * integral


def objective(ctx: LikelihoodContext, lam: GridFunction, beta) -> float:
    """Mean of q over the dataset; -inf if any event sits where lam <= 0."""
    beta = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    ds = ctx.dataset
    ev = ds.delta == 1
    lam_y = ctx.lam_at_events(lam)
    if np.any(lam_y[ev] <= 0.0):
        return -math.inf
    s = ds.w @ beta
    eta = np.exp(s) / mgf(ctx.error, beta)
    cum = ctx.cum_at_records(lam)
    total = np.sum(np.log(lam_y[ev])) + np.sum(s[ev]) - float(eta @ cum)
    return float(total) / ds.n


def grad_beta(ctx: LikelihoodContext, lam: GridFunction, beta):
    """Gradient of the objective in beta.

    d q / d b = D W - (W - E[U e^{b'U}]/M(b)) * exp(b'W)/M(b) * int_0^Y lam.
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    ds = ctx.dataset
    ev = ds.delta == 1
    s = ds.w @ beta
    eta = np.exp(s) / mgf(ctx.error, beta)
    cum = ctx.cum_at_records(lam)
    r = ctx.error.grad_ratio(beta)
    coef = eta * cum
    grad = ds.w[ev].sum(axis=0) - coef @ ds.w + coef.sum() * r
    return grad / ds.n


def grad_lambda_nodes(ctx: LikelihoodContext, lam: GridFunction, beta):
    """Gradient of the objective in the hazard node values.

    Component j pairs the hat function phi_j with the two parts of q:
    (1/n) sum_i [ D_i phi_j(Y_i)/lam(Y_i) - exp(b'W_i)/M(b) int_0^{Y_i} phi_j ].
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    ds = ctx.dataset
    gd = ctx.grid_data(lam.tau, lam.grid_size)
    ev = ds.delta == 1
    lam_y = ctx.lam_at_events(lam)

    out = np.zeros(lam.grid_size + 1)
    k, frac = gd["k"][ev], gd["frac"][ev]
    inv = 1.0 / lam_y[ev]
    np.add.at(out, k, (1.0 - frac) * inv)
    np.add.at(out, k + 1, frac * inv)

    s = ds.w @ beta
    eta = np.exp(s) / mgf(ctx.error, beta)
    out -= gd["H"].T @ eta
    return out / ds.n
