"""Analytic moment-generating-function machinery for the measurement error.

Four error families are supported for the additive error U in W = X + U,
all mean zero with known MGF M(z) = E exp(z'U):

* none            -- U = 0, M(z) = 1.
* uniform         -- independent components uniform on [-a_i, a_i];
                     M(z) = prod_i sinh(a_i z_i) / (a_i z_i).
* gaussian        -- isotropic N(0, sigma^2 I_m); M(z) = exp(sigma^2 |z|^2 / 2).
* poisson         -- independent shifted Poisson components U_i = P_i - mu_i,
                     P_i ~ Pois(mu_i); M(z) = prod_i exp(mu_i (e^{z_i} - 1 - z_i)).

Everything downstream needs, besides M itself, the tilted moments
E[U e^{z'U}] and E[U U' e^{z'U}] (gradient and Hessian of M) and the growth
coefficients E|U|^2 e^{c b'U} / M(c b) that control series convergence.  All
are computed through log-MGF ratios, which stay finite even when M itself
would overflow; the one genuinely growing quantity (exp(z_i) inside the
shifted-Poisson ratios) is guarded by SeriesOverflow.
"""

import math

import numpy as np

from coxerr.errors import SeriesOverflow

# exp() argument beyond which float64 overflows to inf
_EXP_LIMIT = 700.0


def _log_sinhc(x):
    ax = abs(x)
    if ax < 1e-4:
        x2 = x * x
        return math.log1p(x2 / 6.0 + x2 * x2 / 120.0 + x2 * x2 * x2 / 5040.0)
    # log(sinh|x|/|x|) = |x| + log(1 - e^{-2|x|}) - log 2 - log|x|
    return ax + math.log1p(-math.exp(-2.0 * ax)) - math.log(2.0) - math.log(ax)


def _sinhc_ratio1(x):
    """(d/dx log sinh(x)/x) = coth(x) - 1/x, stable at 0."""
    if abs(x) < 1e-4:
        return x / 3.0 - x ** 3 / 45.0 + 2.0 * x ** 5 / 945.0
    return 1.0 / math.tanh(x) - 1.0 / x


def _sinhc_ratio2(x):
    """s''(x)/s(x) for s = sinh(x)/x, i.e. E[V^2 e^{xV}]/E[e^{xV}], V ~ U[-1,1]."""
    if abs(x) < 1e-4:
        x2 = x * x
        num = 1.0 / 3.0 + x2 / 10.0 + x2 * x2 / 168.0
        den = 1.0 + x2 / 6.0 + x2 * x2 / 120.0
        return num / den
    return 1.0 - 2.0 / (x * math.tanh(x)) + 2.0 / (x * x)


class ErrorModel:
    """Base class; concrete families implement the log-MGF and its ratios."""

    family = "none"

    def __init__(self, dim):
        if dim < 1:
            raise ValueError("error dimension must be >= 1")
        self.dim = int(dim)

    def _z(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=np.float64))
        if z.shape != (self.dim,):
            raise ValueError(f"z must have shape ({self.dim},), got {z.shape}")
        if not np.all(np.isfinite(z)):
            raise ValueError("z must be finite")
        return z

    # -- family-specific pieces -------------------------------------------
    def log_mgf(self, z) -> float:
        return 0.0

    def grad_ratio(self, z):
        """E[U e^{z'U}] / M(z)."""
        return np.zeros(self.dim)

    def hess_ratio(self, z):
        """E[U U' e^{z'U}] / M(z)."""
        return np.zeros((self.dim, self.dim))

    def sample(self, rng, size):
        return np.zeros((size, self.dim))


class NoError(ErrorModel):
    """Degenerate error U = 0 (error-free observation)."""

    family = "none"

    def log_mgf(self, z):
        self._z(z)
        return 0.0


class GaussianError(ErrorModel):
    """Isotropic normal error N(0, sigma^2 I)."""

    family = "gaussian"

    def __init__(self, sigma, dim):
        super().__init__(dim)
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.sigma = float(sigma)

    def log_mgf(self, z):
        z = self._z(z)
        return 0.5 * self.sigma ** 2 * float(z @ z)

    def grad_ratio(self, z):
        z = self._z(z)
        return self.sigma ** 2 * z

    def hess_ratio(self, z):
        z = self._z(z)
        s2 = self.sigma ** 2
        return s2 * np.eye(self.dim) + s2 ** 2 * np.outer(z, z)

    def sample(self, rng, size):
        return rng.normal(0.0, self.sigma, size=(size, self.dim))


class BoundedUniformError(ErrorModel):
    """Independent components uniform on [-a_i, a_i]."""

    family = "uniform"

    def __init__(self, halfwidths):
        halfwidths = np.atleast_1d(np.asarray(halfwidths, dtype=np.float64))
        super().__init__(halfwidths.size)
        if np.any(halfwidths <= 0):
            raise ValueError("halfwidths must be positive")
        self.halfwidths = halfwidths

    def log_mgf(self, z):
        z = self._z(z)
        return sum(_log_sinhc(a * zi) for a, zi in zip(self.halfwidths, z))

    def grad_ratio(self, z):
        z = self._z(z)
        return np.array(
            [a * _sinhc_ratio1(a * zi) for a, zi in zip(self.halfwidths, z)]
        )

    def hess_ratio(self, z):
        z = self._z(z)
        r = self.grad_ratio(z)
        out = np.outer(r, r)
        for i, (a, zi) in enumerate(zip(self.halfwidths, z)):
            out[i, i] = a ** 2 * _sinhc_ratio2(a * zi)
        return out

    def sample(self, rng, size):
        return rng.uniform(-self.halfwidths, self.halfwidths, size=(size, self.dim))


class ShiftedPoissonError(ErrorModel):
    """Independent components U_i = P_i - mu_i with P_i ~ Pois(mu_i)."""

    family = "poisson"

    def __init__(self, intensities):
        intensities = np.atleast_1d(np.asarray(intensities, dtype=np.float64))
        super().__init__(intensities.size)
        if np.any(intensities <= 0):
            raise ValueError("intensities must be positive")
        self.intensities = intensities

    def _guard(self, z, limit=_EXP_LIMIT):
        if np.max(np.abs(z)) > limit:
            raise SeriesOverflow(
                f"shifted-Poisson tilt exp({np.max(np.abs(z)):.3g}) exceeds float64 range"
            )

    def log_mgf(self, z):
        z = self._z(z)
        self._guard(z)
        return float(np.sum(self.intensities * (np.expm1(z) - z)))

    def grad_ratio(self, z):
        z = self._z(z)
        self._guard(z)
        return self.intensities * np.expm1(z)

    def hess_ratio(self, z):
        z = self._z(z)
        # the outer product squares exp(z); guard at half the exponent range
        self._guard(z, limit=_EXP_LIMIT / 2)
        r = self.intensities * np.expm1(z)
        out = np.outer(r, r)
        out[np.diag_indices_from(out)] += self.intensities * np.exp(z)
        return out

    def sample(self, rng, size):
        return rng.poisson(self.intensities, size=(size, self.dim)) - self.intensities


# -- public operations -----------------------------------------------------

def mgf(model: ErrorModel, z) -> float:
    """M(z) = E exp(z'U), exact analytic value."""
    lm = model.log_mgf(z)
    return math.exp(lm) if lm < _EXP_LIMIT else math.inf


def mgf_grad(model: ErrorModel, z):
    """E[U exp(z'U)], the gradient of the MGF."""
    return model.grad_ratio(z) * mgf(model, z)


def mgf_hess(model: ErrorModel, z):
    """E[U U' exp(z'U)], the Hessian of the MGF (exactly symmetric)."""
    return model.hess_ratio(z) * mgf(model, z)


def series_growth_coef(model: ErrorModel, beta, k: int) -> float:
    """E|U|^2 e^{(k+1) beta'U} / M((k+1) beta), the k-th growth coefficient.

    Controls summability of the deconvolution series: the full series
    converges whenever sum_k coef(k)/k! A^k is finite for every A > 0.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    beta = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    if isinstance(model, NoError):
        return 0.0
    z = (k + 1.0) * beta
    if np.max(np.abs(z)) > _EXP_LIMIT:
        raise SeriesOverflow(
            f"(k+1)|beta| = {np.max(np.abs(z)):.3g} exceeds the exponent range"
        )
    return float(np.trace(model.hess_ratio(z)))
