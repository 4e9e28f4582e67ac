import math

import numpy as np
import pytest

from coxerr.error_models import GaussianError, NoError, ShiftedPoissonError
from coxerr.errors import InvalidModel
from coxerr.hazard_grid import GridFunction
from coxerr.simulate import (
    CovariateLaw,
    Dataset,
    TrueModel,
    draw_dataset,
    read_csv,
    write_csv,
)


def flat_model(m=1, error=None, beta=None, level=1.0, tau=1.0, g=20):
    lam = GridFunction(tau, np.full(g + 1, level), 2.0)
    beta = np.zeros(m) if beta is None else np.asarray(beta, float)
    error = error if error is not None else NoError(m)
    return TrueModel(lam, beta, CovariateLaw(dim=m), error)


def test_same_seed_identical():
    model = flat_model(m=2, error=GaussianError(0.3, 2), beta=[0.5, -0.2])
    a = draw_dataset(model, 50, seed=123)
    b = draw_dataset(model, 50, seed=123)
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.delta, b.delta)
    np.testing.assert_array_equal(a.w, b.w)
    np.testing.assert_array_equal(a.x, b.x)


def test_no_error_means_w_equals_x():
    ds = draw_dataset(flat_model(m=2), 40, seed=5)
    np.testing.assert_array_equal(ds.w, ds.x)


def test_zero_hazard_node_rejected():
    lam = GridFunction(1.0, np.linspace(0.0, 1.0, 6), 2.0)
    model = TrueModel(lam, np.zeros(1), CovariateLaw(dim=1), NoError(1))
    with pytest.raises(InvalidModel):
        draw_dataset(model, 5, seed=0)


def test_event_probability_against_direct_oracle():
    # beta = 0, lambda = 1, tau = 1: T ~ Exp(1), C ~ U(0,1)
    model = flat_model()
    n = 100_000
    ds = draw_dataset(model, n, seed=99)
    p_hat = ds.delta.mean()

    rng = np.random.default_rng(1234)
    n_mc = 1_000_000
    t_mc = rng.exponential(size=n_mc)
    c_mc = rng.uniform(0, 1, size=n_mc)
    p_mc = (t_mc <= c_mc).mean()

    se = math.sqrt(p_hat * (1 - p_hat) / n + p_mc * (1 - p_mc) / n_mc)
    assert abs(p_hat - p_mc) < 3 * se
    # closed form: P(T <= C) = E[1 - e^-C] = exp(-1)
    assert abs(p_hat - math.exp(-1)) < 3 * math.sqrt(p_hat * (1 - p_hat) / n)


def test_lifetime_distribution_kolmogorov_smirnov():
    # With beta=0 and constant hazard a, T is Exp(a); check the KS statistic
    # over truncated draws against the closed form at the 1% critical value.
    level = 1.3
    model = flat_model(level=level)
    n = 100_000
    ds = draw_dataset(model, n, seed=77)
    finite = np.isfinite(ds.t)
    ts = np.sort(ds.t[finite])
    # empirical CDF over all n (infinite draws count as mass beyond tau)
    ecdf = np.arange(1, ts.size + 1) / n
    cdf = 1.0 - np.exp(-level * ts)
    ks = np.max(np.abs(ecdf - cdf))
    assert ks < 1.63 / math.sqrt(n)


def test_error_moments_match_mgf_hessian():
    mu = np.array([1.0, 2.0])
    error = ShiftedPoissonError(mu)
    model = flat_model(m=2, error=error)
    n = 40_000
    ds = draw_dataset(model, n, seed=3)
    u = ds.w - ds.x
    se_mean = u.std(axis=0, ddof=1) / math.sqrt(n)
    assert np.all(np.abs(u.mean(axis=0)) < 3 * se_mean)
    # covariance at the origin is the hessian ratio: diag(mu), off-diagonal 0
    cov = np.cov(u.T)
    var_se = mu * math.sqrt(2.0 / n) * 2  # generous band for Poisson 4th moments
    assert np.all(np.abs(np.diag(cov) - mu) < 3 * var_se)


def test_bisection_solves_the_inversion_contract():
    # replay each record's documented RNG stream (X, E, C, U) to recover E_i
    lam = GridFunction(1.0, 1.0 + 0.5 * np.linspace(0, 1, 21), 2.0)
    beta = np.array([0.4])
    model = TrueModel(lam, beta, CovariateLaw(dim=1), NoError(1))
    ds = draw_dataset(model, 200, seed=2024)
    for i in range(ds.n):
        rng = np.random.default_rng(np.random.SeedSequence(2024, spawn_key=(i,)))
        x = model.covariate.sample(rng, 1)[0]
        e = rng.exponential()
        np.testing.assert_allclose(x, ds.x[i])
        if np.isfinite(ds.t[i]):
            lhs = lam.cumulative(ds.t[i]) * math.exp(beta[0] * x[0])
            assert abs(lhs - e) < 1e-10


def test_y_within_domain_and_consistency():
    model = flat_model(m=2, error=GaussianError(0.5, 2), beta=[0.3, 0.3])
    ds = draw_dataset(model, 500, seed=8)
    assert np.all(ds.y >= 0) and np.all(ds.y <= model.tau)
    np.testing.assert_array_equal(ds.y, np.minimum(ds.t, ds.c))
    np.testing.assert_array_equal(ds.delta, (ds.t <= ds.c).astype(np.int8))


class TestCsv:
    def test_roundtrip_bit_exact(self, tmp_path):
        model = flat_model(m=2, error=GaussianError(0.3, 2), beta=[0.5, -0.2])
        ds = draw_dataset(model, 30, seed=1)
        path = tmp_path / "data.csv"
        write_csv(ds, path, with_truth=True)
        back = read_csv(path)
        np.testing.assert_array_equal(back.y, ds.y)
        np.testing.assert_array_equal(back.delta, ds.delta)
        np.testing.assert_array_equal(back.w, ds.w)
        np.testing.assert_array_equal(back.x, ds.x)
        np.testing.assert_array_equal(back.t, ds.t)
        np.testing.assert_array_equal(back.c, ds.c)

    def test_header_without_truth(self, tmp_path):
        ds = draw_dataset(flat_model(m=2), 5, seed=1)
        path = tmp_path / "d.csv"
        write_csv(ds, path, with_truth=False)
        header = path.read_text().splitlines()[0]
        assert header == "y,delta,w1,w2"
        assert not read_csv(path).has_truth

    def test_infinite_lifetime_roundtrip(self, tmp_path):
        # records with T beyond the horizon carry an inf marker
        model = flat_model(level=0.2)
        ds = draw_dataset(model, 200, seed=10)
        assert np.any(np.isinf(ds.t))
        path = tmp_path / "inf.csv"
        write_csv(ds, path, with_truth=True)
        np.testing.assert_array_equal(read_csv(path).t, ds.t)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.array([0.1]), np.array([2]), np.array([[0.0]]))
