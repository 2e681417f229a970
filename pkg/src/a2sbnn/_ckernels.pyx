# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scalar-loop kernels. Signatures mirror ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, log, pow, erfc, fabs

cnp.import_array()

cdef double[6] _A = [-3.969683028665376e+01, 2.209460984245205e+02,
                     -2.759285104469687e+02, 1.383577518672690e+02,
                     -3.066479806614716e+01, 2.506628277459239e+00]
cdef double[5] _B = [-5.447609879822406e+01, 1.615858368580409e+02,
                     -1.556989798598866e+02, 6.680131188771972e+01,
                     -1.328068155288572e+01]
cdef double[6] _C = [-7.784894002430293e-03, -3.223964580411365e-01,
                     -2.400758277161838e+00, -2.549732539343734e+00,
                     4.374664141464968e+00, 2.938163982698783e+00]
cdef double[4] _D = [7.784695709041462e-03, 3.224671290700398e-01,
                     2.445134137142996e+00, 3.754408661907416e+00]

cdef double _P_LOW = 0.02425
cdef double _SQRT2 = 1.4142135623730951
cdef double _SQRT2PI = 2.5066282746310002


cdef inline double _lower_probit(double p) nogil:
    # p in (0, 0.5]
    cdef double q, r, x, e, u
    if p < _P_LOW:
        q = sqrt(-2.0 * log(p))
        x = ((((( _C[0]*q + _C[1])*q + _C[2])*q + _C[3])*q + _C[4])*q + _C[5]) / \
            (((( _D[0]*q + _D[1])*q + _D[2])*q + _D[3])*q + 1.0)
    else:
        q = p - 0.5
        r = q * q
        x = ((((( _A[0]*r + _A[1])*r + _A[2])*r + _A[3])*r + _A[4])*r + _A[5]) * q / \
            ((((( _B[0]*r + _B[1])*r + _B[2])*r + _B[3])*r + _B[4])*r + 1.0)
    e = 0.5 * erfc(-x / _SQRT2) - p
    u = e * _SQRT2PI * exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def ndtri(cnp.ndarray[cnp.float64_t, ndim=1] p):
    cdef Py_ssize_t i, n = p.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double v
    with nogil:
        for i in range(n):
            v = p[i]
            if v > 0.5:
                out[i] = -_lower_probit(1.0 - v)
            else:
                out[i] = _lower_probit(v)
    return out


def a2_inv_generator(cnp.ndarray[cnp.float64_t, ndim=1] t, double theta):
    cdef Py_ssize_t i, n = t.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double s, inv_theta = 1.0 / theta
    with nogil:
        for i in range(n):
            s = 2.0 + pow(t[i], inv_theta)
            # smaller root of v^2 - s v + 1 written as 2 / (s + sqrt(s^2 - 4))
            out[i] = 2.0 / (s + sqrt(s * s - 4.0))
    return out


cdef inline double _dot(double* x, double* y, Py_ssize_t n) nogil:
    # four independent accumulators so the loop pipelines without -ffast-math
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef Py_ssize_t k = 0
    while k + 4 <= n:
        s0 += x[k] * y[k]
        s1 += x[k + 1] * y[k + 1]
        s2 += x[k + 2] * y[k + 2]
        s3 += x[k + 3] * y[k + 3]
        k += 4
    while k < n:
        s0 += x[k] * y[k]
        k += 1
    return (s0 + s1) + (s2 + s3)


def cholesky_lower(cnp.ndarray[cnp.float64_t, ndim=2] a, double jitter):
    """Row-oriented Cholesky. Returns None when a pivot is not positive."""
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] L = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] lv = L
    cdef double[:, :] av = a
    cdef Py_ssize_t i, j
    cdef double s
    cdef bint ok = True
    with nogil:
        for i in range(n):
            for j in range(i + 1):
                s = av[i, j] - _dot(&lv[i, 0], &lv[j, 0], j)
                if i == j:
                    s = s + jitter
                    if not s > 0.0:
                        ok = False
                        break
                    lv[i, i] = sqrt(s)
                else:
                    lv[i, j] = s / lv[j, j]
            if not ok:
                break
    if not ok:
        return None
    return L


def sq_exp_cov(cnp.ndarray[cnp.float64_t, ndim=2] pts, double sigma2, double ell):
    cdef Py_ssize_t n = pts.shape[0], i, j
    cdef cnp.ndarray[cnp.float64_t, ndim=2] C = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] cv = C
    cdef double[:, :] pv = pts
    cdef double dx, dy, v, scale = -0.5 / (ell * ell)
    with nogil:
        for i in range(n):
            cv[i, i] = sigma2
            for j in range(i):
                dx = pv[i, 0] - pv[j, 0]
                dy = pv[i, 1] - pv[j, 1]
                v = sigma2 * exp((dx * dx + dy * dy) * scale)
                cv[i, j] = v
                cv[j, i] = v
    return C
