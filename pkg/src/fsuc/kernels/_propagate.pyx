# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled affine propagation kernel.

Iterates x_{k+1} = M x_k + c and records y_k = C x_k at every step.  This is
the single hot loop of the time-domain frequency simulation (the RK4 one-step
propagator M and affine term c are precomputed by the caller).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def propagate_affine(double[:, ::1] m, double[::1] c, double[:, ::1] out_map,
                     double[::1] x0, Py_ssize_t n_steps):
    """Return the (n_steps+1, k) trajectory of y = out_map @ x.

    Row 0 is out_map @ x0; row i is out_map @ x_i with x_i = m @ x_{i-1} + c.
    """
    cdef Py_ssize_t n = m.shape[0]
    cdef Py_ssize_t k = out_map.shape[0]
    cdef Py_ssize_t step, i, j, r
    cdef double acc

    y_arr = np.empty((n_steps + 1, k), dtype=np.float64)
    cdef double[:, ::1] y = y_arr
    x_arr = np.array(x0, dtype=np.float64, copy=True)
    cdef double[::1] x = x_arr
    xn_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] xn = xn_arr
    cdef double[::1] tmp

    for r in range(k):
        acc = 0.0
        for j in range(n):
            acc += out_map[r, j] * x[j]
        y[0, r] = acc

    for step in range(n_steps):
        for i in range(n):
            acc = c[i]
            for j in range(n):
                acc += m[i, j] * x[j]
            xn[i] = acc
        tmp = x
        x = xn
        xn = tmp
        for r in range(k):
            acc = 0.0
            for j in range(n):
                acc += out_map[r, j] * x[j]
            y[step + 1, r] = acc

    return y_arr
