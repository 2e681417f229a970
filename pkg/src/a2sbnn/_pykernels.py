"""Numpy fallbacks for the compiled kernels; same signatures and algorithms."""

import math

import numpy as np

_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425

_erfc = np.frompyfunc(math.erfc, 1, 1)


def _lower_probit(p):
    x = np.empty_like(p)
    tail = p < _P_LOW
    q = np.sqrt(-2.0 * np.log(p[tail]))
    x[tail] = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
        ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    q = p[~tail] - 0.5
    r = q * q
    x[~tail] = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
        (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    # one Halley refinement against the exact CDF
    e = 0.5 * _erfc(-x / math.sqrt(2.0)).astype(np.float64) - p
    u = e * math.sqrt(2.0 * math.pi) * np.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def ndtri(p):
    p = np.asarray(p, dtype=np.float64)
    upper = p > 0.5
    out = np.empty_like(p)
    out[upper] = -_lower_probit(1.0 - p[upper])
    out[~upper] = _lower_probit(p[~upper])
    return out


def a2_inv_generator(t, theta):
    s = 2.0 + np.power(t, 1.0 / theta)
    return 2.0 / (s + np.sqrt(s * s - 4.0))


def cholesky_lower(a, jitter):
    """Left-looking column Cholesky. Returns None when a pivot is not positive."""
    n = a.shape[0]
    L = np.zeros((n, n), dtype=np.float64)
    for j in range(n):
        s = a[j:, j] - L[j:, :j] @ L[j, :j]
        s[0] += jitter
        if not s[0] > 0.0:
            return None
        d = math.sqrt(s[0])
        L[j, j] = d
        L[j + 1:, j] = s[1:] / d
    return L


def sq_exp_cov(pts, sigma2, ell):
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    return sigma2 * np.exp(-d2 / (2.0 * ell * ell))
