"""Exact law of the one-sided two-sample statistic ``D^+ = sup(F_n - G_m)``.

Under the null every interleaving of the ``n`` x's and ``m`` y's is
equally likely, so ``D^+`` is read off a lattice walk that steps ``+m``
for an x and ``-n`` for a y (heights in units of ``1/(n m)``).

Closed forms come from the reflection principle. For ``n = m`` the level
``r/n`` maps to a single walk height and :func:`feller_tail` is exact.
For ``n != m`` several ``(k, l)`` pairs share one ``delta = k/n - l/m``
with different ``k - l``, so p-values are never obtained by inverting
``delta``; they come from a path-counting recursion instead.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

from ._numeric import clamp01, log_binom
from .asymptotic import Method, TailResult, one_sided_asymptotic_tail
from .errors import InvalidParameterError

__all__ = [
    "EXACT_CUTOFF",
    "ENUMERATION_CAP",
    "LATTICE_TOL",
    "LatticeQuery",
    "grf_tail",
    "grf_tail_exact",
    "feller_tail",
    "feller_tail_exact",
    "feller_asymptotic_tail",
    "feller_sandwich",
    "paths_reaching",
    "lattice_height",
    "two_sample_exact_pvalue",
]

# n + m at or below which binomial ratios use big-integer rationals.
EXACT_CUTOFF = 64
# Largest C(n+m, n) for which unequal-size p-values are counted exactly.
ENUMERATION_CAP = 10**7
LATTICE_TOL = 1e-9


@dataclass(frozen=True)
class LatticeQuery:
    n: int
    m: int
    k: int
    l: int

    def __post_init__(self):
        n, m, k, l = self.n, self.m, self.k, self.l
        if n < 1 or m < 1 or m > n:
            raise InvalidParameterError("need positive sizes with m <= n")
        if not 1 <= k <= n or not 0 <= l <= m:
            raise InvalidParameterError("k must lie in 1..n and l in 0..m")
        if self.delta <= 0:
            raise InvalidParameterError("invalid level: delta = k/n - l/m must be positive")

    @property
    def delta(self):
        return Fraction(self.k, self.n) - Fraction(self.l, self.m)


def _ratio_exact(total, top, bottom):
    return Fraction(math.comb(total, top), math.comb(total, bottom))


def _ratio_lgamma(total, top, bottom):
    return math.exp(log_binom(total, top) - log_binom(total, bottom))


def grf_tail_exact(q):
    """``C(n+m, n-k+l) / C(n+m, n)`` as a rational."""
    a = q.n - q.k + q.l
    if a < 0:
        return Fraction(0)
    return _ratio_exact(q.n + q.m, a, q.n)


def grf_tail(q, exact_cutoff=EXACT_CUTOFF):
    """Reflection-principle tail ``P(D^+_{n,m} >= k/n - l/m)`` as stated.

    For ``n != m`` the ratio can exceed 1 (see the module docstring); both
    backends clamp to [0, 1]. :func:`grf_tail_exact` returns the raw ratio.
    """
    a = q.n - q.k + q.l
    if a < 0:
        return 0.0
    total = q.n + q.m
    if total <= exact_cutoff:
        return clamp01(float(_ratio_exact(total, a, q.n)))
    return clamp01(_ratio_lgamma(total, a, q.n))


def feller_tail_exact(n, r):
    if r < 1:
        raise InvalidParameterError("r must be at least 1")
    if r > n:
        return Fraction(0)
    return _ratio_exact(2 * n, n - r, n)


def feller_tail(n, r, exact_cutoff=EXACT_CUTOFF):
    """``P(D^+_{n,n} >= r/n) = C(2n, n-r) / C(2n, n)`` for equal sizes."""
    if r < 1:
        raise InvalidParameterError("r must be at least 1")
    if r > n:
        return 0.0
    if 2 * n <= exact_cutoff:
        return float(_ratio_exact(2 * n, n - r, n))
    return clamp01(_ratio_lgamma(2 * n, n - r, n))


def feller_asymptotic_tail(r):
    """Limit ``P(D^+_{n,n} >= r / sqrt(n)) -> exp(-r^2)``."""
    r = float(r)
    if not r > 0.0:
        raise InvalidParameterError("r must be positive")
    return math.exp(-r * r)


def feller_sandwich(n, k):
    """Factorial-ratio bounds ``n!n!/((n-k-1)!(n+k+1)!) <= . <= n!n!/((n-k)!(n+k)!)``.

    With ``k = floor(sqrt(n) r)`` these bracket ``P(D^+_{n,n} >= r/sqrt(n))``.
    """
    if not 0 <= k < n:
        raise InvalidParameterError("out of range: need 0 <= k < n")
    # n!n!/((n-j)!(n+j)!) = C(2n, n-j)/C(2n, n); same expression as feller_tail
    lower = _ratio_lgamma(2 * n, n - k - 1, n)
    upper = _ratio_lgamma(2 * n, n - k, n)
    return lower, upper


def paths_reaching(n, m, height):
    """Number of x/y interleavings whose walk reaches ``height``.

    The walk steps ``+m`` per x and ``-n`` per y, so its position after
    ``i`` x's and ``j`` y's is ``i*m - j*n``. Counts paths staying strictly
    below ``height`` with an O(n*m) recursion over ``(i, j)`` and subtracts
    from the total.
    """
    if height <= 0:
        return math.comb(n + m, n)
    below = [0] * (m + 1)
    for i in range(n + 1):
        row = [0] * (m + 1)
        for j in range(m + 1):
            if i * m - j * n >= height:
                continue
            if i == 0 and j == 0:
                row[j] = 1
                continue
            row[j] = (below[j] if i > 0 else 0) + (row[j - 1] if j > 0 else 0)
        below = row
    return math.comb(n + m, n) - below[m]


def lattice_height(n, m, observed, tol=LATTICE_TOL):
    """Integer height ``k*m - l*n`` matching ``observed = k/n - l/m``.

    Raises if ``observed`` is further than ``tol`` from every attainable
    lattice value with ``0 <= k <= n`` and ``0 <= l <= m``.
    """
    observed = Fraction(observed) if isinstance(observed, Fraction) else float(observed)
    scale = n * m
    h = round(observed * scale)
    if abs(observed - Fraction(h, scale)) > tol:
        raise InvalidParameterError("invalid statistic for sample sizes: off the lattice")
    g = math.gcd(n, m)
    # k*m - l*n = h has solutions iff g | h; check one lands in range.
    if h % g == 0:
        for k in range(n + 1):
            rem = k * m - h
            if rem % n == 0 and 0 <= rem // n <= m:
                return h
    raise InvalidParameterError("invalid statistic for sample sizes: height not attainable")


def two_sample_exact_pvalue(n, m, observed_d_plus, enumeration_cap=ENUMERATION_CAP):
    """``P(D^+_{n,m} >= observed)`` by the most exact route available.

    Equal sizes use :func:`feller_tail`. Unequal sizes count paths exactly
    while ``C(n+m, n) <= enumeration_cap`` and otherwise fall back to the
    one-sided limit ``exp(-2 nm/(n+m) d^2)``.
    """
    if n < 1 or m < 1:
        raise InvalidParameterError("sample sizes must be positive")
    h = lattice_height(n, m, observed_d_plus)
    if h <= 0:
        return TailResult(1.0, Method.EXACT, label="exact-trivial", exact=Fraction(1))
    if n == m:
        r = h // n
        exact = feller_tail_exact(n, r) if 2 * n <= EXACT_CUTOFF else None
        p = float(exact) if exact is not None else feller_tail(n, r)
        return TailResult(p, Method.EXACT, label="exact-feller", exact=exact,
                          details={"r": r})
    total = math.comb(n + m, n)
    if total <= enumeration_cap:
        exact = Fraction(paths_reaching(n, m, h), total)
        return TailResult(float(exact), Method.ENUMERATION, label="exact-enumeration",
                          exact=exact)
    lam = math.sqrt(n * m / (n + m)) * h / (n * m)
    return TailResult(one_sided_asymptotic_tail(lam), Method.ASYMPTOTIC, terms_used=1,
                      label="asymptotic-one-sided", details={"lambda": lam})
