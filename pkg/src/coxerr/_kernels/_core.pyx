# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernel: Dykstra alternating projections for the hazard cone.

Projects a raw node vector onto the intersection of the box
[floor, ceiling]^(G+1) with the G adjacent-difference slabs
|v[j+1] - v[j]| <= step.  Sets are visited in a fixed order
(box, slab 0, ..., slab G-1) per sweep; the pure-Python fallback in
``pure.py`` replicates the exact operation order so both backends agree
bit-for-bit.
"""

from libc.math cimport fabs, INFINITY


def dykstra_project(const double[::1] raw, double step, double floor, double ceiling,
                    double tol, int max_sweeps):
    """Run Dykstra sweeps on a copy of ``raw``.

    Returns (projected ndarray, sweeps_used, last_sweep_change).
    """
    import numpy as np

    cdef Py_ssize_t n = raw.shape[0]
    cdef Py_ssize_t nslab = n - 1

    out_arr = np.array(raw, dtype=np.float64, copy=True)
    prev_arr = np.empty(n, dtype=np.float64)
    pbox_arr = np.zeros(n, dtype=np.float64)
    pa_arr = np.zeros(max(nslab, 1), dtype=np.float64)
    pb_arr = np.zeros(max(nslab, 1), dtype=np.float64)

    cdef double[::1] v = out_arr
    cdef double[::1] prev = prev_arr
    cdef double[::1] pbox = pbox_arr
    cdef double[::1] pa = pa_arr
    cdef double[::1] pb = pb_arr

    cdef Py_ssize_t j, sweep
    cdef double w, w0, w1, d, shift, v0, v1, change
    cdef int sweeps_used = 0
    cdef double last_change = INFINITY

    for sweep in range(max_sweeps):
        for j in range(n):
            prev[j] = v[j]

        # box [floor, ceiling]
        for j in range(n):
            w = v[j] + pbox[j]
            if w < floor:
                v[j] = floor
            elif w > ceiling:
                v[j] = ceiling
            else:
                v[j] = w
            pbox[j] = w - v[j]

        # slabs |v[j+1] - v[j]| <= step
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
            d = fabs(v[j] - prev[j])
            if d > change:
                change = d
        sweeps_used = sweep + 1
        last_change = change
        if change < tol:
            break

    return out_arr, sweeps_used, last_change
