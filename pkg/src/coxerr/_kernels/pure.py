"""Pure-Python fallback for the compiled Dykstra kernel.

Deliberately mirrors ``_core.pyx`` operation for operation (same sweep
order, same arithmetic) so the two backends produce bit-identical
iterates; only the speed differs.
"""

import math

import numpy as np


def dykstra_project(raw, step, floor, ceiling, tol, max_sweeps):
    """Run Dykstra sweeps on a copy of ``raw``.

    Returns (projected ndarray, sweeps_used, last_sweep_change).
    """
    v = [float(x) for x in raw]
    n = len(v)
    nslab = n - 1
    pbox = [0.0] * n
    pa = [0.0] * max(nslab, 1)
    pb = [0.0] * max(nslab, 1)

    sweeps_used = 0
    last_change = math.inf
    for sweep in range(max_sweeps):
        prev = v[:]

        for j in range(n):
            w = v[j] + pbox[j]
            if w < floor:
                v[j] = floor
            elif w > ceiling:
                v[j] = ceiling
            else:
                v[j] = w
            pbox[j] = w - v[j]

        for j in range(nslab):
            w0 = v[j] + pa[j]
            w1 = v[j + 1] + pb[j]
            d = w1 - w0
            if d > step:
                shift = (d - step) / 2.0
                v0 = w0 + shift
                v1 = w1 - shift
            elif d < -step:
                shift = (-d - step) / 2.0
                v0 = w0 - shift
                v1 = w1 + shift
            else:
                v0 = w0
                v1 = w1
            pa[j] = w0 - v0
            pb[j] = w1 - v1
            v[j] = v0
            v[j + 1] = v1

        change = 0.0
        for j in range(n):
            d = abs(v[j] - prev[j])
            if d > change:
                change = d
        sweeps_used = sweep + 1
        last_change = change
        if change < tol:
            break

    return np.asarray(v, dtype=np.float64), sweeps_used, last_change
