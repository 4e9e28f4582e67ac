import math

import numpy as np
import pytest

from coxerr.error_models import (
    BoundedUniformError,
    GaussianError,
    NoError,
    ShiftedPoissonError,
    mgf,
    mgf_grad,
    mgf_hess,
    series_growth_coef,
)
from coxerr.errors import SeriesOverflow


def all_models():
    return [
        NoError(2),
        GaussianError(0.7, 2),
        BoundedUniformError([0.5, 1.2]),
        ShiftedPoissonError([1.0, 2.5]),
    ]


def test_mgf_none_is_one():
    model = NoError(3)
    for z in ([0, 0, 0], [1.0, -2.0, 0.3]):
        assert mgf(model, z) == 1.0


def test_mgf_at_origin_is_exactly_one():
    for model in all_models():
        assert mgf(model, np.zeros(model.dim)) == 1.0


def test_mgf_grad_zero_at_origin():
    for model in all_models():
        np.testing.assert_allclose(mgf_grad(model, np.zeros(model.dim)), 0.0, atol=1e-15)


def test_mgf_at_least_one():
    # Jensen with mean-zero error
    rng = np.random.default_rng(1)
    for model in all_models():
        for _ in range(20):
            z = rng.uniform(-2, 2, model.dim)
            assert mgf(model, z) >= 1.0


def test_gaussian_mgf_closed_form():
    model = GaussianError(1.0, 2)
    z = np.array([0.3, -1.1])
    assert mgf(model, z) == pytest.approx(math.exp(0.5 * (0.3**2 + 1.1**2)), rel=1e-14)


def test_poisson_mgf_monte_carlo_oracle():
    # E exp(0.3 (P-1)), P ~ Pois(1), by direct simulation
    model = ShiftedPoissonError([1.0])
    z = np.array([0.3])
    exact = mgf(model, z)
    assert exact == pytest.approx(math.exp(math.exp(0.3) - 1.0 - 0.3), rel=1e-14)

    rng = np.random.default_rng(42)
    draws = np.exp(0.3 * (rng.poisson(1.0, size=10_000_000) - 1.0))
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.mean() - exact) < 3 * se


def test_uniform_mgf_series_fallback_smooth():
    model = BoundedUniformError([0.5])
    # across the 1e-4 threshold the two evaluation branches must agree
    below = mgf(model, np.array([1.9e-4]))
    above = mgf(model, np.array([2.1e-4]))
    exact_b = math.sinh(0.5 * 1.9e-4) / (0.5 * 1.9e-4)
    exact_a = math.sinh(0.5 * 2.1e-4) / (0.5 * 2.1e-4)
    assert below == pytest.approx(exact_b, rel=1e-15)
    assert above == pytest.approx(exact_a, rel=1e-15)


def test_gaussian_grad_closed_form():
    model = GaussianError(0.5, 2)
    z = np.array([1.0, 0.0])
    expected = np.array([0.25 * math.exp(0.125), 0.0])
    np.testing.assert_allclose(mgf_grad(model, z), expected, rtol=1e-12)


def test_poisson_grad_closed_form():
    model = ShiftedPoissonError([2.0])
    z = np.array([0.1])
    expected = 2.0 * (math.exp(0.1) - 1.0) * mgf(model, z)
    assert mgf_grad(model, z)[0] == pytest.approx(expected, rel=1e-12)


def test_gaussian_hess_closed_form():
    model = GaussianError(1.0, 1)
    got = mgf_hess(model, np.array([1.0]))
    assert got[0, 0] == pytest.approx(2.0 * math.exp(0.5), rel=1e-12)


def test_poisson_hess_identity_at_origin():
    model = ShiftedPoissonError([1.0, 1.0])
    np.testing.assert_allclose(mgf_hess(model, np.zeros(2)), np.eye(2), atol=1e-15)


def _fd_grad(model, z, h=1e-6):
    m = z.size
    out = np.zeros(m)
    for i in range(m):
        e = np.zeros(m)
        e[i] = h
        out[i] = (mgf(model, z + e) - mgf(model, z - e)) / (2 * h)
    return out


def _fd_hess(model, z, h=1e-4):
    m = z.size
    out = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            ei = np.zeros(m)
            ej = np.zeros(m)
            ei[i] = h
            ej[j] = h
            out[i, j] = (
                mgf(model, z + ei + ej)
                - mgf(model, z + ei - ej)
                - mgf(model, z - ei + ej)
                + mgf(model, z - ei - ej)
            ) / (4 * h * h)
    return out


def test_grad_matches_finite_differences():
    rng = np.random.default_rng(7)
    for model in all_models():
        for _ in range(20):
            z = rng.uniform(-1.5, 1.5, model.dim)
            np.testing.assert_allclose(
                mgf_grad(model, z), _fd_grad(model, z), rtol=1e-5, atol=1e-8
            )


def test_hess_matches_finite_differences():
    rng = np.random.default_rng(8)
    for model in all_models():
        for _ in range(20):
            z = rng.uniform(-1.5, 1.5, model.dim)
            np.testing.assert_allclose(
                mgf_hess(model, z), _fd_hess(model, z), rtol=1e-5, atol=1e-6
            )


def test_hess_exactly_symmetric():
    rng = np.random.default_rng(9)
    for model in all_models():
        z = rng.uniform(-2, 2, model.dim)
        h = mgf_hess(model, z)
        np.testing.assert_array_equal(h, h.T)


def test_growth_coef_gaussian_unit():
    model = GaussianError(1.0, 1)
    for k in (0, 1, 5, 40):
        assert series_growth_coef(model, np.array([0.0]), k) == pytest.approx(1.0)


def test_growth_coef_gaussian_closed_form():
    model = GaussianError(0.6, 2)
    beta = np.array([0.8, -0.4])
    k = 3
    s2 = 0.36
    expected = sum((1 + (k + 1) ** 2 * b * b * s2) * s2 for b in beta)
    assert series_growth_coef(model, beta, k) == pytest.approx(expected, rel=1e-12)


def test_growth_coef_bounded_by_square_radius():
    # bounded error: coefficient can never exceed the squared bound on |U|
    model = BoundedUniformError([0.5])
    val = series_growth_coef(model, np.array([1.0]), 3)
    assert 0.0 < val <= 0.25


def test_growth_coef_poisson_closed_form_and_monte_carlo():
    model = ShiftedPoissonError([1.0])
    val = series_growth_coef(model, np.array([0.2]), 2)
    expected = (math.exp(0.6) - 1.0) ** 2 + math.exp(0.6)
    assert val == pytest.approx(expected, rel=1e-12)

    rng = np.random.default_rng(11)
    u = rng.poisson(1.0, size=10_000_000) - 1.0
    tilt = np.exp(0.6 * u)
    num = (u * u * tilt).mean()
    den = tilt.mean()
    ratio = num / den
    # delta-method standard error of the ratio estimate
    cov = np.cov(u * u * tilt, tilt)
    se = math.sqrt(
        (cov[0, 0] - 2 * ratio * cov[0, 1] + ratio**2 * cov[1, 1]) / u.size
    ) / den
    assert abs(val - ratio) < 3 * se


def test_growth_coef_none_is_zero():
    assert series_growth_coef(NoError(2), np.array([1.0, 1.0]), 4) == 0.0


def test_growth_coef_overflow_guard():
    model = ShiftedPoissonError([1.0])
    with pytest.raises(SeriesOverflow):
        series_growth_coef(model, np.array([10.0]), 200)


def test_condition3_summability():
    # partial sums of coef(k)/k! A^k must stabilize: ratio test numerically
    a_const = 2.0
    for model in all_models()[1:]:
        beta = np.full(model.dim, 0.4)
        log_term_prev = None
        total = 0.0
        tail_ratios = []
        for k in range(200):
            coef = series_growth_coef(model, beta, k)
            log_term = math.log(max(coef, 1e-300)) - math.lgamma(k + 1) + k * math.log(a_const)
            if log_term_prev is not None and k > 20:
                tail_ratios.append(math.exp(log_term - log_term_prev))
            log_term_prev = log_term
            total += math.exp(log_term)
        assert np.isfinite(total)
        assert max(tail_ratios[-20:]) < 1.0
