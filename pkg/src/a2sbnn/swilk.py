"""Shapiro-Wilk W test, Royston's AS R94 algorithm (uncensored case)."""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateInputError, DomainError
from .stats import inv_normal_cdf

_C1 = (0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.544, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(cc, x):
    # cc[0] + cc[1] x + cc[2] x^2 + ...
    return sum(c * x**i for i, c in enumerate(cc))


def _upper_normal_tail(z):
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def swilk_coefficients(n: int) -> np.ndarray:
    """Upper-half coefficients a_1..a_{n//2} (positive, largest first)."""
    nn2 = n // 2
    if n == 3:
        return np.array([math.sqrt(0.5)])
    m = inv_normal_cdf((np.arange(1, nn2 + 1) - 0.375) / (n + 0.25))
    summ2 = 2.0 * float(np.dot(m, m))
    ssumm2 = math.sqrt(summ2)
    rsn = 1.0 / math.sqrt(n)
    a = -m / ssumm2
    a1 = _poly(_C1, rsn) - m[0] / ssumm2
    if n > 5:
        a2 = _poly(_C2, rsn) - m[1] / ssumm2
        fac = math.sqrt((summ2 - 2.0 * m[0] ** 2 - 2.0 * m[1] ** 2)
                        / (1.0 - 2.0 * a1**2 - 2.0 * a2**2))
        a = -m / fac
        a[0], a[1] = a1, a2
    else:
        fac = math.sqrt((summ2 - 2.0 * m[0] ** 2) / (1.0 - 2.0 * a1**2))
        a = -m / fac
        a[0] = a1
    return a


def shapiro_wilk(x) -> tuple[float, float]:
    """Return ``(W, p)`` for the null hypothesis that ``x`` is normal."""
    x = np.sort(np.asarray(x, dtype=np.float64).ravel())
    n = x.size
    if n < 3 or n > 5000:
        raise DomainError(f"Shapiro-Wilk requires 3 <= n <= 5000, got n={n}")
    rng = x[-1] - x[0]
    if rng < 1e-19 * max(1.0, abs(x[0])):
        raise DegenerateInputError("Shapiro-Wilk undefined for a constant sample")

    a = swilk_coefficients(n)
    full = np.zeros(n)
    full[: a.size] = -a
    full[n - a.size:] = a[::-1]
    xs = (x - np.median(x)) / rng
    ss = float(np.sum((xs - xs.mean()) ** 2))
    w = min(float(np.dot(full, xs)) ** 2 / ss, 1.0)

    if n == 3:
        p = 1.90985931710274 * (math.asin(math.sqrt(w)) - 1.04719755119660)
        return w, max(p, 0.0)
    w1 = 1.0 - w
    if w1 <= 0.0:
        return w, 1.0
    y = math.log(w1)
    if n <= 11:
        gamma = _poly(_G, n)
        if y >= gamma:
            return w, 1e-99
        y = -math.log(gamma - y)
        mu = _poly(_C3, n)
        sd = math.exp(_poly(_C4, n))
    else:
        ln = math.log(n)
        mu = _poly(_C5, ln)
        sd = math.exp(_poly(_C6, ln))
    return w, _upper_normal_tail((y - mu) / sd)
