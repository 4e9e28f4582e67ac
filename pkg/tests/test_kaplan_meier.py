import math

import numpy as np
import pytest

from coxerr.error_models import NoError
from coxerr.hazard_grid import GridFunction
from coxerr.kaplan_meier import km_censor
from coxerr.simulate import CovariateLaw, Dataset, TrueModel, draw_dataset


def make_dataset(y, delta, m=1):
    y = np.asarray(y, dtype=float)
    return Dataset(y, np.asarray(delta), np.zeros((y.size, m)))


def sim_dataset(n, seed, level=1.0, tau=1.0):
    lam = GridFunction(tau, np.full(11, level), 2.0)
    model = TrueModel(lam, np.zeros(1), CovariateLaw(dim=1), NoError(1))
    return draw_dataset(model, n, seed=seed)


def test_no_censoring_events_gives_one():
    ds = make_dataset([0.2, 0.5, 0.9], [1, 1, 1])
    km = km_censor(ds)
    for u in (0.0, 0.3, 0.9):
        assert km.evaluate(u) == 1.0
    assert km.evaluate(0.95) == 0.0  # beyond the largest observation


def test_hand_two_point_case():
    # Y = (1, 2), censoring at 2: survival 1 before 2, 0 at and beyond 2
    ds = make_dataset([1.0, 2.0], [1, 0])
    km = km_censor(ds)
    assert km.evaluate(0.5) == 1.0
    assert km.evaluate(1.9) == 1.0
    assert km.evaluate(2.0) == 0.0


def test_matches_direct_product_formula():
    # independent literal evaluation of the defining product
    ds = sim_dataset(200, seed=21)
    km = km_censor(ds)
    y, delta = ds.y, ds.delta
    rng = np.random.default_rng(5)
    for u in rng.uniform(0, y.max(), 25):
        prod = 1.0
        for j in range(ds.n):
            if delta[j] == 0 and y[j] <= u:
                n_gt = int(np.sum(y > y[j]))
                prod *= n_gt / (n_gt + 1)
        assert km.evaluate(u) == pytest.approx(prod, rel=1e-12)


def test_monotone_bounded_zero_beyond_max():
    ds = sim_dataset(500, seed=22)
    km = km_censor(ds)
    us = np.linspace(0, 1, 201)
    vals = km.evaluate(us)
    assert np.all(vals >= 0) and np.all(vals <= 1)
    assert np.all(np.diff(vals) <= 1e-15)
    assert km.evaluate(ds.y.max() + 1e-9) == 0.0


def test_record_order_invariance():
    ds = sim_dataset(300, seed=23)
    rng = np.random.default_rng(1)
    perm = rng.permutation(ds.n)
    shuffled = Dataset(ds.y[perm], ds.delta[perm], ds.w[perm])
    km1, km2 = km_censor(ds), km_censor(shuffled)
    us = np.linspace(0, 1, 57)
    np.testing.assert_array_equal(km1.evaluate(us), km2.evaluate(us))


def test_sup_error_against_known_censor_law():
    # C ~ U(0, 1): G_C(u) = 1 - u; sup error over [0, 0.8] small at n = 2000
    ds = sim_dataset(2000, seed=24)
    km = km_censor(ds)
    us = np.linspace(0, 0.8, 400)
    err = np.max(np.abs(km.evaluate(us) - (1 - us)))
    assert err <= 0.08


def test_rate_tracks_root_log_n_over_n():
    # median sup-error decreasing in n and within 3 sqrt(ln n / n)
    med = {}
    for n in (500, 2000, 8000):
        errs = []
        for rep in range(20):
            ds = sim_dataset(n, seed=1000 * rep + n)
            km = km_censor(ds)
            us = np.linspace(0, 0.8, 200)
            errs.append(np.max(np.abs(km.evaluate(us) - (1 - us))))
        med[n] = float(np.median(errs))
    assert med[500] > med[2000] > med[8000]
    for n, e in med.items():
        assert e <= 3.0 * math.sqrt(math.log(n) / n)
