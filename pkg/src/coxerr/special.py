"""In-house distribution functions and quantiles.

Confidence-set construction needs the upper quantiles of the chi-square and
standard normal laws.  Both are implemented here from first principles
(regularized incomplete gamma via power series / Lentz continued fraction,
normal CDF via erfc) so the inference report does not depend on a stats
library; accuracy contract is 1e-9 on CDF round-trips.
"""

import math

_MAX_ITER = 500
_EPS = 1e-16


def reg_lower_gamma(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if a <= 0:
        raise ValueError("shape parameter must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cf(a, x)


def _gamma_series(a, x):
    # P(a,x) = x^a e^-x / Gamma(a) * sum_{n>=0} x^n / (a (a+1) ... (a+n))
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))

def _gamma_cf(a, x):
    # Q(a,x) by modified Lentz continued fraction.
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def chi2_cdf(x: float, df: int) -> float:
    if x <= 0:
        return 0.0
    return reg_lower_gamma(df / 2.0, x / 2.0)


def _chi2_pdf(x, df):
    a = df / 2.0
    return math.exp((a - 1.0) * math.log(x) - x / 2.0 - a * math.log(2.0) - math.lgamma(a))


def chi2_upper_quantile(alpha: float, df: int) -> float:
    """q with P(chi2_df > q) = alpha, i.e. CDF(q) = 1 - alpha.

    Bisection bracket followed by Newton polish; |CDF(q) - (1-alpha)| < 1e-10.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    target = 1.0 - alpha
    lo, hi = 0.0, float(df)
    while chi2_cdf(hi, df) < target:
        hi *= 2.0
        if hi > 1e8:
            raise ValueError("quantile bracket failed")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if chi2_cdf(mid, df) < target:
            lo = mid
        else:
            hi = mid
    q = 0.5 * (lo + hi)
    for _ in range(60):
        f = chi2_cdf(q, df) - target
        if abs(f) < 1e-12:
            break
        deriv = _chi2_pdf(q, df)
        if deriv <= 0:
            break
        step = f / deriv
        q_new = q - step
        if q_new <= 0:
            q_new = q / 2.0
        q = q_new
    if abs(chi2_cdf(q, df) - target) > 1e-10:
        raise ValueError("chi-square quantile did not converge")
    return q


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_upper_quantile(p: float) -> float:
    """z with P(Z > z) = p for standard normal Z.

    Newton iteration on erfc(z / sqrt(2)) = 2p, bisection-seeded; terminates
    when the Newton step falls below 1e-12.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    lo, hi = -40.0, 40.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if math.erfc(mid / math.sqrt(2.0)) - 2.0 * p > 0:
            lo = mid
        else:
            hi = mid
    z = 0.5 * (lo + hi)
    for _ in range(60):
        f = math.erfc(z / math.sqrt(2.0)) - 2.0 * p
        deriv = -math.sqrt(2.0 / math.pi) * math.exp(-0.5 * z * z)
        step = f / deriv
        z -= step
        if abs(step) < 1e-12:
            break
    return z
