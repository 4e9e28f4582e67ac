import numpy as np
import pytest

from coxerr.errors import NonConvergence, OutOfDomain
from coxerr.hazard_grid import (
    GridFunction,
    grid_cumulative_at,
    grid_product_integral,
    project,
    restricted_trapz_weights,
)


def random_feasible(rng, g, tau, lipschitz, floor=0.0, ceiling=8.0):
    """Random walk with slope steps inside the cone; used as feasible probes."""
    h = tau / g
    v = np.empty(g + 1)
    v[0] = rng.uniform(floor, min(ceiling, floor + 3.0))
    for j in range(g):
        step = rng.uniform(-lipschitz * h, lipschitz * h)
        v[j + 1] = np.clip(v[j] + step, floor, ceiling)
    return v


class TestEvaluate:
    def test_constant(self):
        f = GridFunction(1.0, np.full(5, 2.5), 1.0)
        for t in (0.0, 0.3, 1.0):
            assert f.evaluate(t) == pytest.approx(2.5)

    def test_linear_is_exact(self):
        tau, g, L = 2.0, 8, 1.5
        t_nodes = np.linspace(0, tau, g + 1)
        f = GridFunction(tau, 0.4 + L * t_nodes, L)
        assert f.evaluate(tau / 2) == pytest.approx(0.4 + L * tau / 2, rel=1e-14)

    def test_hand_interpolation(self):
        f = GridFunction(1.0, [0.0, 0.1, 0.2, 0.3, 0.4], 1.0)
        assert f.evaluate(0.125) == pytest.approx(0.05, abs=1e-15)

    def test_out_of_domain(self):
        f = GridFunction(1.0, np.ones(3), 1.0)
        with pytest.raises(OutOfDomain):
            f.evaluate(-0.1)
        with pytest.raises(OutOfDomain):
            f.evaluate(1.1)


class TestCumulative:
    def test_constant(self):
        f = GridFunction(1.0, np.full(11, 3.0), 1.0)
        assert f.cumulative(0.7) == pytest.approx(2.1, rel=1e-14)

    def test_zero(self):
        f = GridFunction(1.0, np.zeros(4), 1.0)
        assert f.cumulative(0.9) == 0.0

    def test_triangle_area(self):
        f = GridFunction(1.0, [0.0, 1.0, 0.0], 2.0)
        assert f.cumulative(1.0) == pytest.approx(0.5, abs=1e-15)

    def test_additivity_against_manual_trapezoid(self):
        rng = np.random.default_rng(3)
        tau, g, L = 1.5, 12, 2.0
        values = random_feasible(rng, g, tau, L)
        f = GridFunction(tau, values, L)

        def manual(t):
            # independent reimplementation: dense nodal walk + partial cell
            h = tau / g
            total = 0.0
            for j in range(g):
                left, right = j * h, (j + 1) * h
                if t >= right:
                    total += 0.5 * h * (values[j] + values[j + 1])
                elif t > left:
                    vt = values[j] + (values[j + 1] - values[j]) * (t - left) / h
                    total += 0.5 * (t - left) * (values[j] + vt)
            return total

        for t in rng.uniform(0, tau, 8):
            assert f.cumulative(t) == pytest.approx(manual(t), abs=1e-12)
        s, t = 0.3, 1.2
        mid = f.cumulative(t) - f.cumulative(s)
        assert f.cumulative(s) + mid == pytest.approx(f.cumulative(t), abs=1e-12)

    def test_monotone(self):
        rng = np.random.default_rng(4)
        values = random_feasible(rng, 20, 1.0, 2.0)
        f = GridFunction(1.0, values, 2.0)
        ts = np.sort(rng.uniform(0, 1, 30))
        cums = f.cumulative(ts)
        assert np.all(np.diff(cums) >= -1e-15)


class TestMinValue:
    def test_cases(self):
        assert GridFunction(1.0, [2.0, 2.0, 2.0], 1.0).min_value() == 2.0
        assert GridFunction(1.0, [3.0, 1.0, 2.0], 4.0).min_value() == 1.0
        h = 0.5
        assert GridFunction(1.0, [0.5, 0.5 + 2.0 * h, 0.5], 2.0).min_value() == 0.5


class TestProject:
    def test_feasible_unchanged(self):
        rng = np.random.default_rng(5)
        tau, g, L = 1.0, 10, 2.0
        values = random_feasible(rng, g, tau, L)
        out = project(values, tau, L)
        np.testing.assert_allclose(out.values, values, atol=1e-12)

    def test_negative_constants_to_zero(self):
        out = project(np.full(6, -1.0), 1.0, 1.0, floor=0.0)
        np.testing.assert_allclose(out.values, 0.0, atol=1e-12)

    def test_hand_qp(self):
        # projection of (0, 5) onto {v >= 0, |v1 - v0| <= 1}: shift both
        # endpoints toward each other by half the excess -> (2, 3)
        out = project(np.array([0.0, 5.0]), 1.0, 1.0, floor=0.0)
        np.testing.assert_allclose(out.values, [2.0, 3.0], atol=1e-9)

    def test_idempotent(self):
        rng = np.random.default_rng(6)
        raw = rng.normal(0, 3, 21)
        once = project(raw, 1.0, 2.0, floor=0.1, ceiling=4.0)
        twice = project(once.values, 1.0, 2.0, floor=0.1, ceiling=4.0)
        np.testing.assert_allclose(twice.values, once.values, atol=1e-10)

    def test_contraction_toward_feasible_points(self):
        rng = np.random.default_rng(7)
        tau, g, L = 1.0, 15, 2.0
        for _ in range(10):
            raw = rng.normal(0.5, 2.0, g + 1)
            proj = project(raw, tau, L, floor=0.0, ceiling=6.0).values
            feasible = random_feasible(rng, g, tau, L, floor=0.0, ceiling=6.0)
            assert np.linalg.norm(proj - feasible) <= np.linalg.norm(raw - feasible) + 1e-9

    def test_result_feasible_exactly(self):
        rng = np.random.default_rng(8)
        tau, g, L = 2.0, 25, 1.3
        h = tau / g
        for _ in range(5):
            raw = rng.normal(0, 5, g + 1)
            out = project(raw, tau, L, floor=0.2, ceiling=3.0)
            assert out.values.min() >= 0.2
            assert out.values.max() <= 3.0
            assert np.abs(np.diff(out.values)).max() <= L * h * (1 + 1e-12)

    def test_nonconvergence_raises(self):
        with pytest.raises(NonConvergence):
            project(np.array([0.0, 100.0, 0.0, 100.0]), 1.0, 0.01, max_sweeps=2)


class TestHelpers:
    def test_grid_cumulative_matches_gridfunction(self):
        rng = np.random.default_rng(9)
        values = random_feasible(rng, 10, 1.0, 2.0)
        f = GridFunction(1.0, values, 2.0)
        ts = rng.uniform(0, 1, 12)
        np.testing.assert_allclose(
            grid_cumulative_at(values, 1.0, ts), f.cumulative(ts), atol=1e-14
        )

    def test_product_integral_linear_case(self):
        # int_0^1 t * (1 - t) dt = 1/6, both factors exactly linear on the grid
        t = np.linspace(0, 1, 11)
        assert grid_product_integral(t, 1 - t, 1.0) == pytest.approx(1 / 6, abs=1e-15)

    def test_restricted_weights_integrate_constants(self):
        times = np.linspace(0, 1, 11)
        for y_max in (1.0, 0.95, 0.5, 0.037):
            w = restricted_trapz_weights(times, y_max)
            assert w.sum() == pytest.approx(y_max, abs=1e-14)

    def test_restricted_weights_linear_exact(self):
        times = np.linspace(0, 2, 21)
        vals = 3.0 - times
        y_max = 1.23
        w = restricted_trapz_weights(times, y_max)
        exact = 3.0 * y_max - y_max**2 / 2
        assert float(w @ vals) == pytest.approx(exact, abs=1e-13)
