"""Truncated Taylor-series arithmetic on numpy arrays.

A series is an array ``c`` of shape ``(K, ...)`` holding normalized Taylor
coefficients ``c[k] = f^(k)(x0) / k!``; trailing axes broadcast over
evaluation points. All operations are exact up to rounding for the first
``K`` coefficients (``deriv`` loses the last one).
"""

import numpy as np


def mul(a, b):
    K = a.shape[0]
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=np.result_type(a, b))
    for k in range(K):
        for j in range(k + 1):
            out[k] += a[j] * b[k - j]
    return out


def power(c, alpha):
    """c**alpha for real alpha, requires c[0] > 0."""
    K = c.shape[0]
    out = np.zeros_like(c, dtype=float)
    out[0] = c[0] ** alpha
    for k in range(1, K):
        acc = np.zeros_like(c[0], dtype=float)
        for j in range(1, k + 1):
            acc += ((alpha + 1.0) * j - k) * c[j] * out[k - j]
        out[k] = acc / (k * c[0])
    return out


def reciprocal(c):
    return power(c, -1.0)


def div(a, b):
    return mul(a, reciprocal(b))


def deriv(c):
    """Series of the derivative; the last coefficient is padded with zero."""
    out = np.zeros_like(c)
    K = c.shape[0]
    for k in range(K - 1):
        out[k] = (k + 1) * c[k + 1]
    return out


def polynomial(coeffs, x, K):
    """Taylor series of a polynomial (ascending ``coeffs``) around points ``x``."""
    x = np.asarray(x, dtype=float)
    poly = np.polynomial.Polynomial(coeffs)
    out = np.zeros((K,) + x.shape)
    fact = 1.0
    for k in range(K):
        out[k] = poly(x) / fact
        poly = poly.deriv()
        fact *= k + 1
    return out
