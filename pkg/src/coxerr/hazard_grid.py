"""Piecewise-linear grid representation of the baseline-hazard parameter cone.

The feasible set for the baseline hazard is the cone of nonnegative functions
on [0, tau] with Lipschitz constant at most L.  A member is stored by its
values at the G+1 equispaced nodes t_j = j tau / G; between nodes it is the
linear interpolant, which never leaves the cone.  Euclidean projection onto
the cone (optionally intersected with a floor and a sup-norm ceiling) is done
by Dykstra alternating projections over the box constraint and the G
adjacent-difference slabs; the sweep kernel lives in ``coxerr._kernels``.
"""

import math

import numpy as np

from coxerr import _kernels
from coxerr.errors import NonConvergence, OutOfDomain

# relative slack for validating constraints that were enforced by clamping
_FEAS_RTOL = 1e-9


class GridFunction:
    """Nonnegative Lipschitz function on [0, tau], piecewise linear on a grid."""

    __slots__ = ("tau", "values", "lipschitz", "_cum")

    def __init__(self, tau, values, lipschitz, validate=True):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("values must be a 1-D vector with at least two nodes")
        if tau <= 0 or lipschitz <= 0:
            raise ValueError("tau and the Lipschitz constant must be positive")
        object.__setattr__(self, "tau", float(tau))
        object.__setattr__(self, "lipschitz", float(lipschitz))
        object.__setattr__(self, "values", values.copy())
        self.values.setflags(write=False)
        if validate:
            self._validate()
        # nodal prefix integrals (trapezoid is exact for the interpolant)
        h = self.h
        cum = np.concatenate(
            ([0.0], np.cumsum(0.5 * h * (self.values[1:] + self.values[:-1])))
        )
        object.__setattr__(self, "_cum", cum)

    def _validate(self):
        v = self.values
        if not np.all(np.isfinite(v)):
            raise ValueError("node values must be finite")
        if v.min() < 0.0:
            raise ValueError(f"negative node value {v.min()!r}")
        step = self.lipschitz * self.h
        slack = _FEAS_RTOL * max(1.0, step, float(np.abs(v).max()))
        worst = float(np.abs(np.diff(v)).max()) if v.size > 1 else 0.0
        if worst > step + slack:
            raise ValueError(
                f"slope violation: |dv| = {worst!r} exceeds L*h = {step!r}"
            )

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    @property
    def grid_size(self):
        """Number of cells G."""
        return self.values.size - 1

    @property
    def h(self):
        return self.tau / self.grid_size

    @property
    def times(self):
        return np.linspace(0.0, self.tau, self.values.size)

    def _check_domain(self, t):
        t = np.asarray(t, dtype=np.float64)
        tol = 1e-12 * self.tau
        if np.any(t < -tol) or np.any(t > self.tau + tol):
            raise OutOfDomain(f"t outside [0, {self.tau}]")
        return np.clip(t, 0.0, self.tau)

    def evaluate(self, t):
        """Linear interpolation; exact at nodes."""
        t = self._check_domain(t)
        return np.interp(t, self.times, self.values)

    def cumulative(self, t):
        """Integral of the interpolant over [0, t] (exact, trapezoid per cell)."""
        t = self._check_domain(t)
        return grid_cumulative_at(self.values, self.tau, t, _cum=self._cum)

    def min_value(self):
        """min over [0, tau]; attained at a node for a piecewise-linear function."""
        return float(self.values.min())

    def to_rows(self):
        """(t_j, value_j) pairs for CSV export."""
        return list(zip(self.times.tolist(), self.values.tolist()))

    def __repr__(self):
        return (
            f"GridFunction(tau={self.tau}, G={self.grid_size}, "
            f"L={self.lipschitz}, range=[{self.values.min():.4g}, {self.values.max():.4g}])"
        )


def grid_cumulative_at(values, tau, t, _cum=None):
    """Integral over [0, t] of the piecewise-linear interpolant of ``values``.

    Unlike GridFunction this puts no sign/slope constraints on the nodal
    values, so it also serves signed tables (e.g. a-hat * K-hat).
    """
    values = np.asarray(values, dtype=np.float64)
    n_nodes = values.size
    g = n_nodes - 1
    h = tau / g
    if _cum is None:
        _cum = np.concatenate(
            ([0.0], np.cumsum(0.5 * h * (values[1:] + values[:-1])))
        )
    t = np.asarray(t, dtype=np.float64)
    scalar = t.ndim == 0
    t = np.atleast_1d(np.clip(t, 0.0, tau))
    k = np.minimum((t / h).astype(np.int64), g - 1)
    u = t - k * h
    frac = u / h
    vt = values[k] * (1.0 - frac) + values[k + 1] * frac
    out = _cum[k] + 0.5 * u * (values[k] + vt)
    return float(out[0]) if scalar else out


def grid_product_integral(values_a, values_b, tau) -> float:
    """Exact integral over [0, tau] of the product of two piecewise-linear
    interpolants sharing the same equispaced grid (the product is piecewise
    quadratic, integrated per cell in closed form)."""
    a = np.asarray(values_a, dtype=np.float64)
    b = np.asarray(values_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("nodal tables must share the grid")
    h = tau / (a.size - 1)
    a0, a1 = a[:-1], a[1:]
    b0, b1 = b[:-1], b[1:]
    cells = a0 * b0 / 3.0 + (a0 * b1 + a1 * b0) / 6.0 + a1 * b1 / 3.0
    return float(h * np.sum(cells))


def restricted_trapz_weights(times, y_max):
    """Trapezoid weights over grid nodes for integrating a piecewise-linear
    nodal integrand over [0, min(y_max, tau)]; the partial last cell uses the
    interpolated endpoint value, expressed as extra weight on its two nodes."""
    times = np.asarray(times, dtype=np.float64)
    h = times[1] - times[0]
    w = np.zeros_like(times)
    if y_max >= times[-1]:
        w[:] = h
        w[0] = w[-1] = 0.5 * h
        return w
    k = int(np.searchsorted(times, y_max, side="right") - 1)
    k = min(max(k, 0), times.size - 2)
    if k > 0:
        w[:k] = h
        w[0] = 0.5 * h
        w[k] = 0.5 * h
    u = y_max - times[k]
    frac = u / h
    w[k] += 0.5 * u * (2.0 - frac)
    w[k + 1] += 0.5 * u * frac
    return w


def evaluate(f: GridFunction, t):
    return f.evaluate(t)


def cumulative(f: GridFunction, t):
    return f.cumulative(t)


def min_value(f: GridFunction) -> float:
    return f.min_value()


def project(raw, tau, lipschitz, floor=0.0, ceiling=math.inf,
            tol=1e-10, max_sweeps=10_000) -> GridFunction:
    """Euclidean projection of raw node values onto the constrained cone.

    Target set: {v : floor <= v_j <= ceiling, |v_{j+1} - v_j| <= L tau / G}.
    Dykstra alternating projections until successive sweeps differ by < tol
    in max norm; NonConvergence if the sweep cap is hit with change > 1e-6.
    The converged iterate is clamped so both constraint families hold exactly.
    """
    raw = np.ascontiguousarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(raw)):
        raise ValueError("raw vector must be finite")
    if floor < 0:
        raise ValueError("floor must be nonnegative")
    if ceiling <= floor:
        raise ValueError("ceiling must exceed floor")
    g = raw.size - 1
    step = lipschitz * tau / g

    out, sweeps, change = _kernels.dykstra_project(
        raw, step, float(floor), float(ceiling), tol, int(max_sweeps)
    )
    if sweeps >= max_sweeps and change > 1e-6:
        raise NonConvergence(
            f"Dykstra projection: residual {change:.3e} after {sweeps} sweeps"
        )

    # exact feasibility: box clip, then a forward slab clamp that respects
    # the box (its admissible interval is nonempty because v_j is in the box)
    out = np.clip(out, floor, ceiling)
    for j in range(g):
        lo = max(floor, out[j] - step)
        hi = min(ceiling, out[j] + step)
        if out[j + 1] < lo:
            out[j + 1] = lo
        elif out[j + 1] > hi:
            out[j + 1] = hi
    return GridFunction(tau, out, lipschitz)
