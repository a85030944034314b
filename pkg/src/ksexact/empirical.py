"""Empirical distribution functions, KS statistics and DKWM bands.

All suprema are taken at the order statistics (right limits and left
limits of the ECDF), never on a grid, so the statistics are exact for the
supplied CDF.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, InvalidParameterError

__all__ = [
    "Sample",
    "KsStatistics",
    "ConfidenceBand",
    "as_sample",
    "ecdf_eval",
    "ks_one_sample",
    "ks_one_sample_sorted",
    "ks_two_sample",
    "dkwm_band",
]

TIE_WARNING = (
    "sample contains tied values; exact p-values assume a continuous "
    "distribution and are conservative in the presence of ties"
)


@dataclass(frozen=True, eq=False)
class Sample:
    """Sorted, finite observations.

    Use :meth:`from_data` (or :func:`as_sample`) rather than the raw
    constructor; it sorts, validates and detects ties.
    """

    values: np.ndarray
    n: int
    has_ties: bool

    @classmethod
    def from_data(cls, data):
        values = np.sort(np.asarray(data, dtype=float).ravel())
        if values.size == 0:
            raise DataError("empty sample")
        if not np.all(np.isfinite(values)):
            raise DataError("sample contains NaN or infinite values")
        values.flags.writeable = False
        has_ties = bool(values.size > 1 and np.any(values[1:] == values[:-1]))
        return cls(values=values, n=int(values.size), has_ties=has_ties)

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Sample(n={self.n}, has_ties={self.has_ties})"


def as_sample(data):
    if isinstance(data, Sample):
        return data
    return Sample.from_data(data)


@dataclass(frozen=True)
class KsStatistics:
    d_plus: float
    d_minus: float

    @property
    def d(self):
        return max(self.d_plus, self.d_minus)

    def as_dict(self):
        return {"d_plus": self.d_plus, "d_minus": self.d_minus, "d": self.d}


def ecdf_eval(sample, t):
    """Right-continuous empirical CDF ``#{x_i <= t} / n``; ``t`` may be an array."""
    sample = as_sample(sample)
    if np.ndim(t) == 0:
        t = float(t)
        if math.isnan(t):
            raise InvalidParameterError("invalid query point: NaN")
        return int(np.searchsorted(sample.values, t, side="right")) / sample.n
    t = np.asarray(t, dtype=float)
    if np.any(np.isnan(t)):
        raise InvalidParameterError("invalid query point: NaN")
    return np.searchsorted(sample.values, t, side="right") / sample.n


def _cdf_values(cdf, values):
    try:
        u = np.asarray(cdf(values), dtype=float)
        if u.shape != values.shape:
            raise ValueError
    except (TypeError, ValueError):
        u = np.array([float(cdf(v)) for v in values])
    if np.any(np.isnan(u)) or np.any(u < 0.0) or np.any(u > 1.0):
        raise InvalidParameterError("invalid CDF: values outside [0, 1]")
    return u


def ks_one_sample_sorted(u):
    """One-sided statistics from CDF values at sorted observations.

    ``u`` may be 1-D (one sample) or 2-D (one sample per row). Returns
    ``(d_plus, d_minus)`` as floats or arrays accordingly.
    """
    u = np.asarray(u, dtype=float)
    n = u.shape[-1]
    i = np.arange(1, n + 1, dtype=float)
    d_plus = np.max(i / n - u, axis=-1)
    d_minus = np.max(u - (i - 1) / n, axis=-1)
    return np.maximum(d_plus, 0.0), np.maximum(d_minus, 0.0)


def ks_one_sample(sample, cdf):
    """One-sample KS statistics against a fully specified CDF.

    Parameters
    ----------
    sample : Sample or array-like
    cdf : callable
        Nondecreasing map into [0, 1]. Called once with the sorted values
        as an array; scalar-only callables are accepted too.

    Returns
    -------
    KsStatistics
        ``d_plus = max_i(i/n - F(x_(i)))`` and
        ``d_minus = max_i(F(x_(i)) - (i-1)/n)``, both floored at zero.
    """
    sample = as_sample(sample)
    u = _cdf_values(cdf, sample.values)
    d_plus, d_minus = ks_one_sample_sorted(u)
    return KsStatistics(float(d_plus), float(d_minus))


def ks_two_sample(x, y):
    """Two-sample statistics; ``d_plus`` is ``sup(F_n - G_m)``.

    Differences are accumulated as integers ``i*m - j*n`` and divided once
    by ``n*m``, so lattice values come out correctly rounded.
    """
    x = as_sample(x)
    y = as_sample(y)
    merged = np.union1d(x.values, y.values)
    i = np.searchsorted(x.values, merged, side="right").astype(np.int64)
    j = np.searchsorted(y.values, merged, side="right").astype(np.int64)
    height = i * y.n - j * x.n
    scale = x.n * y.n
    d_plus = max(0, int(height.max())) / scale
    d_minus = max(0, int(-height.min())) / scale
    return KsStatistics(d_plus, d_minus)


@dataclass(frozen=True)
class ConfidenceBand:
    """Step-function band ``ecdf +/- epsilon`` clamped to [0, 1].

    ``knots[0]`` is ``-inf``; the band takes ``lower[k]``/``upper[k]`` on
    ``[knots[k], knots[k+1])``.
    """

    level: float
    epsilon: float
    knots: np.ndarray
    ecdf: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def _index(self, t):
        return np.searchsorted(self.knots, t, side="right") - 1

    def lower_at(self, t):
        return self.lower[self._index(t)]

    def upper_at(self, t):
        return self.upper[self._index(t)]

    def contains(self, cdf):
        """True if a continuous nondecreasing ``cdf`` lies inside the band.

        On each step interval only the CDF's left value (against ``lower``)
        and its left limit at the next knot (against ``upper``) matter.
        """
        left = np.asarray(cdf(self.knots[1:]), dtype=float)
        start = np.concatenate(([0.0], left))
        end = np.concatenate((left, [1.0]))
        return bool(np.all(start >= self.lower) and np.all(end <= self.upper))

    def as_rows(self):
        return list(zip(self.knots.tolist(), self.ecdf.tolist(),
                        self.lower.tolist(), self.upper.tolist()))


def dkwm_band(sample, level):
    """Two-sided DKWM confidence band at confidence ``level``."""
    from .asymptotic import dkwm_epsilon

    sample = as_sample(sample)
    eps = dkwm_epsilon(sample.n, level)
    knots = np.unique(sample.values)
    counts = np.searchsorted(sample.values, knots, side="right")
    ecdf = np.concatenate(([0.0], counts / sample.n))
    knots = np.concatenate(([-np.inf], knots))
    return ConfidenceBand(
        level=float(level),
        epsilon=eps,
        knots=knots,
        ecdf=ecdf,
        lower=np.clip(ecdf - eps, 0.0, 1.0),
        upper=np.clip(ecdf + eps, 0.0, 1.0),
    )
