"""Small numerical helpers shared by the exact engines."""

import math

import numpy as np
from scipy.special import gammaln


def log_binom(n, k):
    """Natural log of ``C(n, k)`` via log-gamma; works on scalars or arrays."""
    if np.isscalar(n) and np.isscalar(k):
        return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def clamp01(p):
    return min(1.0, max(0.0, float(p)))


def compensated_sum(values):
    """Exactly rounded sum of an iterable of floats (Shewchuk via ``math.fsum``)."""
    return math.fsum(values)
