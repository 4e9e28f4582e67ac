"""Series deconvolution estimators for the moment functions b, a, p.

The inference machinery needs the conditional-moment functions

    b(t) = E[ e^{b0'X} G_T(t|X) ],   a(t) = E[ X ... ],   p(t) = E[ X X' ... ]

but only W = X + U is observed.  Expanding exp(b'X - L(t) e^{b'X}) in powers
of L(t) and inverting each tilt E_X[e^{c'W}] = M(c) e^{c'X} term by term gives
unbiased single-observation estimators as alternating series; with
M_k = M((k+1) b), g_k = E[U e^{(k+1)b'U}], H_k = E[U U' e^{(k+1)b'U}]:

    B_k(W,t) = (-1)^k L^k(t) e^{(k+1)b'W} / (k! M_k)
    A_k(W,t) = B_k(W,t) (W - g_k / M_k)
    P_k(W,t) = B_k(W,t) (W W' - (g_k W' + W g_k')/M_k - (H_k/M_k - 2 g_k g_k'/M_k^2))

Truncation is adaptive per record: after term N the remaining tail is bounded
in closed form by the first tail term times a geometric closure, where the
factorial tail carries x = L(t) e^{b'W}, a per-family polynomial/geometric
envelope for the moment factors, and the MGF damping 1/M_j (M_j is
nondecreasing and log-convex along the ray, which also bounds the term
ratios).  Each record stops at the first N whose tail bound drops below the
policy tolerance relative to its accumulated magnitude, and reports that
bound.  Everything runs in log space with per-record scale shifts and sign
tracking, so evaluations stay meaningful for tilts far beyond the float64
range of the raw terms.
"""

import math
from dataclasses import dataclass

import numpy as np

from coxerr.error_models import (
    BoundedUniformError,
    ErrorModel,
    GaussianError,
    NoError,
    ShiftedPoissonError,
)
from coxerr.errors import DegenerateB, SeriesOverflow, TruncationFailure
from coxerr.hazard_grid import GridFunction
from coxerr.simulate import Dataset

_EXP_LIMIT = 700.0


@dataclass(frozen=True)
class SeriesPolicy:
    max_terms: int = 80
    tail_tol: float = 1e-10

    def __post_init__(self):
        if self.max_terms < 1 or self.tail_tol <= 0:
            raise ValueError("max_terms >= 1 and tail_tol > 0 required")


class PluginContext:
    """Fitted quantities the series need: hazard, beta, error law, data."""

    def __init__(self, lambda_hat: GridFunction, beta_hat, error: ErrorModel,
                 dataset: Dataset):
        self.lambda_hat = lambda_hat
        self.beta_hat = np.atleast_1d(np.asarray(beta_hat, dtype=np.float64))
        self.error = error
        self.dataset = dataset
        if lambda_hat.min_value() < 0:
            raise ValueError("hazard estimate must be nonnegative")
        # per-k caches of log M_k, g_k/M_k, H_k/M_k
        self._log_m = []
        self._ratio1 = []
        self._ratio2 = []
        # sqrt-growth envelope triples and their pairwise products (see below)
        self._sqrt_env = _sqrt_growth_envelope(error, self.beta_hat)
        self._growth_env = [
            (cq * cr, xq * xr, dq + dr)
            for cq, xq, dq in self._sqrt_env
            for cr, xr, dr in self._sqrt_env
        ]

    @property
    def dim(self):
        return self.beta_hat.size

    def cumulative(self, t):
        return self.lambda_hat.cumulative(t)

    def k_data(self, k):
        while len(self._log_m) <= k:
            j = len(self._log_m)
            z = (j + 1.0) * self.beta_hat
            if np.max(np.abs(z), initial=0.0) > _EXP_LIMIT:
                raise SeriesOverflow(f"tilt (k+1)|beta| out of range at k={j}")
            self._log_m.append(self.error.log_mgf(z))
            self._ratio1.append(self.error.grad_ratio(z))
            self._ratio2.append(self.error.hess_ratio(z))
        return self._log_m[k], self._ratio1[k], self._ratio2[k]


def _sqrt_growth_envelope(error, beta):
    """Triples (coef, xmult, degree) with, for every j >= 0,

        sqrt( E|U|^2 e^{(j+1)b'U} / M_j )  <=  sum coef * xmult^j * (j+1)^degree.

    Each summand later multiplies the factorial tail with argument scaled by
    xmult and polynomial weight (j+1)^degree; products of two triples bound
    the growth coefficient itself for the matrix series.
    """
    if isinstance(error, NoError):
        return []
    if isinstance(error, GaussianError):
        s2 = error.sigma ** 2
        return [
            (error.sigma * math.sqrt(error.dim), 1.0, 0),
            (s2 * float(np.linalg.norm(beta)), 1.0, 1),
        ]
    if isinstance(error, BoundedUniformError):
        return [(math.sqrt(float(np.sum(error.halfwidths ** 2))), 1.0, 0)]
    if isinstance(error, ShiftedPoissonError):
        b_max = float(np.max(np.abs(beta)))
        if 2.0 * b_max > _EXP_LIMIT:
            raise SeriesOverflow("beta too large for the shifted-Poisson envelope")
        c = math.sqrt(float(np.sum(error.intensities ** 2 + error.intensities)))
        return [(c * math.exp(b_max), math.exp(b_max), 0)]
    raise TypeError(f"unsupported error model {type(error).__name__}")


def _log_tail_factor(log_x, k, log_m1, log_m_gap, degree=0):
    """log of a bound on sum_{j>k} (j+1)^degree x^j / (j! M_j), x = e^{log_x}.

    First tail term times the geometric closure 1/(1-rho).  M_j = M((j+1)b)
    is nondecreasing and log-convex along the ray, so 1/M_j <= e^{-log_m1}
    on the tail and the per-step M ratio is at most e^{-log_m_gap}; rho then
    bounds every subsequent term ratio.  +inf where rho cannot close.
    Everything stays in logs so extreme tilts never overflow.
    """
    log_x = np.asarray(log_x, dtype=np.float64)
    log_rho = (
        log_x
        - math.log(k + 2.0)
        + degree * math.log((k + 3.0) / (k + 2.0))
        + min(-log_m_gap, 0.0)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (
            degree * math.log(k + 2.0)
            + (k + 1.0) * log_x
            - math.lgamma(k + 2.0)
            - log_m1
            - np.log1p(-np.exp(np.minimum(log_rho, 0.0)))
        )
    out = np.where(np.isneginf(log_x), -np.inf, out)
    return np.where(log_rho < 0.0, out, np.inf)


class _Eval:
    """Series evaluation over a batch of records at one time point.

    Values are also kept in scaled form value = mantissa * exp(log_scale),
    which stays meaningful when the plain value overflows float64 (extreme
    tilts b'W); the exact-expectation oracles consume that form.
    """

    __slots__ = ("b", "a", "p", "tail_rel", "n_terms",
                 "b_scaled", "a_scaled", "p_scaled", "log_scale")

    def __init__(self, b, a, p, tail_rel, n_terms,
                 b_scaled=None, a_scaled=None, p_scaled=None, log_scale=None):
        self.b = b
        self.a = a
        self.p = p
        self.tail_rel = tail_rel
        self.n_terms = n_terms
        self.b_scaled = b_scaled
        self.a_scaled = a_scaled
        self.p_scaled = p_scaled
        self.log_scale = log_scale


def _series_eval(w, t, ctx: PluginContext, pol: SeriesPolicy, kinds=("b", "a", "p")):
    """Evaluate the requested series for every row of w at time t."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim == 1:
        w = w[:, None]
    n, m = w.shape
    want_a = "a" in kinds
    want_p = "p" in kinds

    lam_cum = float(ctx.cumulative(t))
    log_lam = math.log(lam_cum) if lam_cum > 0 else -math.inf
    s = w @ ctx.beta_hat
    sn = np.linalg.norm(w, axis=1)
    log_x = log_lam + s
    sqrt_env = ctx._sqrt_env
    growth_env = ctx._growth_env
    g0_true = float(np.trace(ctx.k_data(0)[2]))
    sqrt_g0 = math.sqrt(g0_true)

    shift = np.full(n, -np.inf)
    acc_b = np.zeros(n)
    acc_a = np.zeros((n, m)) if want_a else None
    acc_p = np.zeros((n, m, m)) if want_p else None

    tail_rel = np.full(n, np.inf)
    n_terms_rec = np.full(n, pol.max_terms, dtype=np.int64)

    # every record sums exactly to its own first index meeting the tail rule;
    # converged records leave the active set, so the tail of extreme records
    # does not multiply the cost across the whole batch
    idx = np.arange(n)
    for k in range(pol.max_terms):
        if idx.size == 0:
            break
        log_m, ratio1, ratio2 = ctx.k_data(k)
        sa = s[idx]
        log_mag = (k + 1.0) * sa - math.lgamma(k + 1.0) - log_m
        if k > 0:
            log_mag = log_mag + k * log_lam
        sign = 1.0 if k % 2 == 0 else -1.0

        old_shift = shift[idx]
        new_shift = np.maximum(old_shift, log_mag)
        factor = np.exp(old_shift - new_shift)
        mag = np.exp(log_mag - new_shift)
        shift[idx] = new_shift
        acc_b[idx] = acc_b[idx] * factor + sign * mag
        wa = w[idx]
        if want_a:
            acc_a[idx] = acc_a[idx] * factor[:, None] \
                + (sign * mag)[:, None] * (wa - ratio1)
        if want_p:
            centered = (
                wa[:, :, None] * wa[:, None, :]
                - ratio1[None, :, None] * wa[:, None, :]
                - wa[:, :, None] * ratio1[None, None, :]
                - (ratio2 - 2.0 * np.outer(ratio1, ratio1))
            )
            acc_p[idx] = acc_p[idx] * factor[:, None, None] \
                + (sign * mag)[:, None, None] * centered

        if lam_cum == 0.0:
            # only the k = 0 term survives at t = 0
            tail_rel[idx] = 0.0
            n_terms_rec[idx] = 1
            idx = idx[:0]
            break

        # closed-form tail bound for the active records after terms 0..k;
        # a zero coefficient (sn or the envelope zero) annihilates its piece
        # even when the geometric closure is unavailable (nan -> -inf repair)
        lxa = log_x[idx]
        sna = sn[idx]
        log_m1 = ctx.k_data(k + 1)[0]
        log_m_gap = ctx.k_data(k + 2)[0] - log_m1
        log_t0 = _log_tail_factor(lxa, k, log_m1, log_m_gap)
        tail_b = sa + log_t0
        if want_a or want_p:
            log_sn = _safe_log(sna)
            env_tails = [
                _safe_log_scalar(c) + sa
                + _log_tail_factor(lxa + math.log(xm), k, log_m1, log_m_gap, d)
                for c, xm, d in sqrt_env
            ]
        if want_a:
            tail_a = _fix_zero_coef(log_sn + tail_b)
            for piece in env_tails:
                tail_a = np.logaddexp(tail_a, _fix_zero_coef(piece))
        if want_p:
            tail_p = _fix_zero_coef(2.0 * log_sn + tail_b)
            for piece in env_tails:
                tail_p = np.logaddexp(
                    tail_p, _fix_zero_coef(math.log(2.0) + log_sn + piece)
                )
            for c, xm, d in growth_env:
                piece = (
                    _safe_log_scalar(3.0 * c) + sa
                    + _log_tail_factor(lxa + math.log(xm), k, log_m1, log_m_gap, d)
                )
                tail_p = np.logaddexp(tail_p, _fix_zero_coef(piece))

        # relative gaps: the vector/matrix series can legitimately vanish at
        # isolated W (zero crossings), so their denominators are floored at
        # the series' natural term scale |partial b| * (k = 0 payload bound);
        # the b series itself has a positive limit and needs no floor
        log_abs_b = _safe_log(np.abs(acc_b[idx])) + shift[idx]
        worst = _rel_gap(tail_b, log_abs_b) if "b" in kinds \
            else np.full(idx.size, -np.inf)
        if want_a:
            part_a = _safe_log(np.abs(acc_a[idx]).max(axis=1)) + shift[idx]
            denom_a = np.maximum(part_a, log_abs_b + _safe_log(sna + sqrt_g0))
            worst = np.maximum(worst, _rel_gap(tail_a, denom_a))
        if want_p:
            part_p = _safe_log(
                np.abs(acc_p[idx]).reshape(idx.size, -1).max(axis=1)
            ) + shift[idx]
            denom_p = np.maximum(
                part_p,
                log_abs_b
                + _safe_log(sna * sna + 2.0 * sqrt_g0 * sna + 3.0 * g0_true),
            )
            worst = np.maximum(worst, _rel_gap(tail_p, denom_p))

        tail_rel[idx] = np.exp(worst)
        done = worst <= math.log(pol.tail_tol)
        n_terms_rec[idx[done]] = k + 1
        idx = idx[~done]

    if idx.size:
        bad = float(np.max(tail_rel[idx]))
        if bad > 1e-6:
            raise TruncationFailure(
                f"series cap {pol.max_terms} reached with relative tail bound {bad:.3e}"
            )
    n_terms = int(np.max(n_terms_rec))

    if want_p:
        acc_p = 0.5 * (acc_p + np.swapaxes(acc_p, 1, 2))
    with np.errstate(over="ignore"):
        scale = np.exp(shift)
        b_val = acc_b * scale
        a_val = acc_a * scale[:, None] if want_a else None
        p_val = acc_p * scale[:, None, None] if want_p else None
    return _Eval(b_val, a_val, p_val, tail_rel, n_terms,
                 b_scaled=acc_b, a_scaled=acc_a, p_scaled=acc_p,
                 log_scale=shift)


def _safe_log(arr):
    with np.errstate(divide="ignore"):
        return np.log(arr)


def _safe_log_scalar(v):
    return math.log(v) if v > 0 else -math.inf


def _fix_zero_coef(arr):
    """(-inf) + (+inf) = nan means 'zero coefficient times open tail' => 0."""
    arr = np.asarray(arr, dtype=np.float64)
    return np.where(np.isnan(arr), -np.inf, arr)


def _rel_gap(log_tail, log_part):
    """log(tail / |partial|); a zero tail converges even against a zero sum."""
    with np.errstate(invalid="ignore"):
        out = log_tail - log_part
    return np.where(np.isneginf(log_tail), -np.inf, out)


# -- public operations -------------------------------------------------------

def series_b(w, t, ctx: PluginContext, pol: SeriesPolicy) -> float:
    """Truncated series whose conditional mean is exp(b'X - L(t) e^{b'X})."""
    ev = _series_eval(np.atleast_2d(np.asarray(w, dtype=np.float64)), t, ctx, pol,
                      kinds=("b",))
    return float(ev.b[0])


def series_a(w, t, ctx: PluginContext, pol: SeriesPolicy):
    """Vector series with conditional mean X exp(b'X - L(t) e^{b'X})."""
    ev = _series_eval(np.atleast_2d(np.asarray(w, dtype=np.float64)), t, ctx, pol,
                      kinds=("a",))
    return ev.a[0]


def series_p(w, t, ctx: PluginContext, pol: SeriesPolicy):
    """Matrix series with conditional mean X X' exp(b'X - L(t) e^{b'X})."""
    ev = _series_eval(np.atleast_2d(np.asarray(w, dtype=np.float64)), t, ctx, pol,
                      kinds=("p",))
    return ev.p[0]


def series_batch(w, t, ctx: PluginContext, pol: SeriesPolicy,
                 kinds=("b", "a", "p")) -> _Eval:
    """All requested series for every record row of w at time t."""
    return _series_eval(w, t, ctx, pol, kinds=kinds)


@dataclass
class AbpTables:
    """Sample-mean plug-in estimates of b, a, p tabulated on a time grid."""

    times: np.ndarray
    b: np.ndarray          # (Gt,)
    a: np.ndarray          # (Gt, m)
    p: np.ndarray          # (Gt, m, m)
    tail_rel_max: float
    n_terms_max: int

    @property
    def dim(self):
        return self.a.shape[1]

    def interp_b(self, t):
        return np.interp(t, self.times, self.b)

    def interp_a(self, t):
        t = np.asarray(t, dtype=np.float64)
        return np.stack(
            [np.interp(t, self.times, self.a[:, j]) for j in range(self.dim)],
            axis=-1,
        )


def estimate_abp(ctx: PluginContext, pol: SeriesPolicy, times=None) -> AbpTables:
    """Tabulate b-hat, a-hat, p-hat (sample means of the series) on a grid.

    Raises DegenerateB as soon as any b-hat node is not safely positive,
    since every downstream quantity divides by it.
    """
    if times is None:
        times = ctx.lambda_hat.times
    times = np.asarray(times, dtype=np.float64)
    w = ctx.dataset.w
    n_t = times.size
    m = ctx.dim
    b = np.empty(n_t)
    a = np.empty((n_t, m))
    p = np.empty((n_t, m, m))
    tail_max = 0.0
    terms_max = 0
    for j, t in enumerate(times):
        ev = _series_eval(w, float(t), ctx, pol)
        b[j] = float(np.mean(ev.b))
        a[j] = ev.a.mean(axis=0)
        p[j] = ev.p.mean(axis=0)
        tail_max = max(tail_max, float(np.max(ev.tail_rel)))
        terms_max = max(terms_max, ev.n_terms)
        if b[j] <= 1e-12:
            raise DegenerateB(f"b-hat({t}) = {b[j]:.3e} is not safely positive")
    return AbpTables(times, b, a, p, tail_max, terms_max)


def tk_hat(ctx: PluginContext, tables: AbpTables):
    """T-hat(t) K-hat(t) = (p-hat - a-hat a-hat'/b-hat) lambda-hat(t), symmetric."""
    if np.any(tables.b <= 1e-12):
        raise DegenerateB("b-hat table contains non-positive entries")
    lam_t = ctx.lambda_hat.evaluate(tables.times)
    outer = tables.a[:, :, None] * tables.a[:, None, :] / tables.b[:, None, None]
    out = (tables.p - outer) * lam_t[:, None, None]
    return 0.5 * (out + np.swapaxes(out, 1, 2))
