# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, fabs, isnan

cnp.import_array()


def combined_error(pred, actual):
    cdef const double[:, ::1] p = np.ascontiguousarray(pred, dtype=np.float64)
    cdef const double[:, ::1] a = np.ascontiguousarray(actual, dtype=np.float64)
    cdef Py_ssize_t n_rows = a.shape[0], n_out = a.shape[1]
    ce_mean_arr = np.empty(n_rows, dtype=np.float64)
    grad_arr = np.empty((n_rows, n_out), dtype=np.float64)
    cdef double[::1] ce_mean = ce_mean_arr
    cdef double[:, ::1] g = grad_arr
    cdef Py_ssize_t r, j
    cdef double row_mean, diff, ae, ape, denom, total, scale
    with nogil:
        for r in range(n_rows):
            row_mean = 0.0
            for j in range(n_out):
                row_mean += a[r, j]
            row_mean /= n_out
            total = 0.0
            for j in range(n_out):
                diff = p[r, j] - a[r, j]
                ae = fabs(diff)
                denom = row_mean
                if a[r, j] > 0:
                    ape = 100.0 * ae / a[r, j]
                    if ape <= 100.0:
                        denom = a[r, j]
                total += 100.0 * ae / denom
                if diff > 0:
                    g[r, j] = 100.0 / denom
                elif diff < 0:
                    g[r, j] = -100.0 / denom
                else:
                    g[r, j] = 0.0
            ce_mean[r] = total / n_out
            scale = 2.0 * ce_mean[r] / n_out
            for j in range(n_out):
                g[r, j] = scale * g[r, j]
    return ce_mean_arr, grad_arr


def impute_weekly(values, Py_ssize_t period):
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    out_arr = np.array(v, dtype=np.float64, copy=True)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t n = v.shape[0], i, j, k
    cdef Py_ssize_t bad = -1
    cdef double num, den, w, lo, hi, x
    cdef bint found
    with nogil:
        for i in range(n):
            if not isnan(v[i]):
                continue
            num = 0.0
            den = 0.0
            lo = INFINITY
            hi = -INFINITY
            found = False
            k = 1
            while i - k * period >= 0 or i + k * period < n:
                w = 1.0 / k
                j = i - k * period
                if j >= 0 and not isnan(v[j]):
                    num += w * v[j]
                    den += w
                    lo = min(lo, v[j])
                    hi = max(hi, v[j])
                    found = True
                j = i + k * period
                if j < n and not isnan(v[j]):
                    num += w * v[j]
                    den += w
                    lo = min(lo, v[j])
                    hi = max(hi, v[j])
                    found = True
                k += 1
            if found:
                x = num / den
                out[i] = lo if x < lo else (hi if x > hi else x)
            elif bad < 0:
                bad = i
    return out_arr, bad
