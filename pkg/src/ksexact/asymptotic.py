"""Limiting laws: the Kolmogorov series, DKWM bounds and bridge hitting times.

DKWM bounds are exposed in two scalings. In epsilon space the two-sided
bound is ``2 exp(-2 n eps**2)``; in lambda space (``lambda = sqrt(n) eps``)
it reads ``2 exp(-2 lambda**2)``. Both are the same number.
"""

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

from ._numeric import clamp01
from .errors import InvalidParameterError, NumericalError

__all__ = [
    "Method",
    "TailResult",
    "kolmogorov_series_tail",
    "kolmogorov_critical",
    "two_sample_asymptotic_pvalue",
    "one_sided_asymptotic_tail",
    "dkwm_bound",
    "dkwm_bound_lambda",
    "dkwm_epsilon",
    "bb_hitting_density",
    "CRITICAL_BRACKET",
]

CRITICAL_BRACKET = (1e-3, 10.0)


class Method(str, enum.Enum):
    EXACT = "exact"
    ASYMPTOTIC = "asymptotic"
    BOUND = "bound"
    MONTE_CARLO = "monte_carlo"
    ENUMERATION = "enumeration"


@dataclass(frozen=True)
class TailResult:
    """A tail probability together with how it was obtained.

    ``err`` is a truncation bound for series, a standard error for Monte
    Carlo and zero for exact results. ``exact`` carries the rational value
    when one was computed; ``details`` holds engine-specific extras.
    """

    p: float
    method: Method
    err: float = 0.0
    terms_used: int = 0
    label: str = ""
    exact: Fraction | None = None
    notes: tuple = ()
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"probability out of range: {self.p}")
        if self.err < 0.0:
            raise ValueError("negative error bound")
        if self.method is Method.ASYMPTOTIC and self.terms_used < 1:
            raise ValueError("asymptotic results must report terms used")
        if not self.label:
            object.__setattr__(self, "label", self.method.value)

    def as_dict(self):
        out = {
            "p": self.p,
            "method": self.method.value,
            "label": self.label,
            "err": self.err,
            "terms_used": self.terms_used,
        }
        if self.exact is not None:
            out["exact"] = f"{self.exact.numerator}/{self.exact.denominator}"
        if self.notes:
            out["notes"] = list(self.notes)
        if self.details:
            out["details"] = dict(self.details)
        return out


def kolmogorov_series_tail(lam, tol=1e-12):
    """``P(sup|B| > lam) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lam^2)``.

    Terms are added until the next one drops below ``tol``; that term is
    reported as ``err`` (alternating-series bound).
    """
    lam = float(lam)
    if not lam > 0.0 or math.isinf(lam):
        raise InvalidParameterError("series valid only for finite positive lambda")
    if not tol > 0.0:
        raise InvalidParameterError("tol must be positive")
    total = 0.0
    k = 1
    while True:
        total += (2.0 if k % 2 else -2.0) * math.exp(-2.0 * k * k * lam * lam)
        nxt = 2.0 * math.exp(-2.0 * (k + 1) ** 2 * lam * lam)
        if nxt < tol:
            break
        k += 1
    return TailResult(clamp01(total), Method.ASYMPTOTIC, err=nxt, terms_used=k,
                      label="kolmogorov-series")


def kolmogorov_critical(alpha, tol=1e-12, bracket=CRITICAL_BRACKET):
    """Invert the Kolmogorov series by bisection.

    Bisection runs until the bracket can no longer shrink in floating
    point, which gives ``lambda`` to machine precision as well as the tail
    to within ``tol`` of ``alpha``.
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise InvalidParameterError("alpha must lie in (0, 1)")
    series_tol = min(tol, 1e-16)
    lo, hi = bracket

    def f(lam):
        return kolmogorov_series_tail(lam, series_tol).p - alpha

    f_lo, f_hi = f(lo), f(hi)
    if f_lo < 0.0 or f_hi > 0.0:
        raise NumericalError(
            f"bracket exhausted: alpha={alpha} not attained on [{lo}, {hi}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if f_mid > 0.0:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    if abs(f(lam)) > max(tol, 1e-15):
        raise NumericalError(f"bisection did not reach tol={tol}")
    return lam


def two_sample_asymptotic_pvalue(n, m, observed_d, tol=1e-12):
    """Limit p-value for the two-sided two-sample statistic."""
    if n < 1 or m < 1:
        raise InvalidParameterError("sample sizes must be positive")
    observed_d = float(observed_d)
    if not 0.0 <= observed_d <= 1.0:
        raise InvalidParameterError("observed statistic must lie in [0, 1]")
    lam = math.sqrt(n * m / (n + m)) * observed_d
    if lam == 0.0:
        return TailResult(1.0, Method.ASYMPTOTIC, terms_used=1,
                          label="kolmogorov-series", notes=("zero statistic",))
    res = kolmogorov_series_tail(lam, tol)
    return TailResult(res.p, res.method, res.err, res.terms_used, res.label,
                      details={"lambda": lam})


def one_sided_asymptotic_tail(lam):
    """Limit of ``P(sqrt(nm/(n+m)) D^+ >= lam)``, i.e. ``exp(-2 lam^2)``."""
    lam = float(lam)
    if lam < 0.0:
        raise InvalidParameterError("lambda must be nonnegative")
    return math.exp(-2.0 * lam * lam)


def dkwm_bound(n, eps, sided="two"):
    """DKWM bound on ``P(D_n > eps)`` (``sided="two"``) or a one-sided tail."""
    if n < 1:
        raise InvalidParameterError("n must be positive")
    return dkwm_bound_lambda(math.sqrt(n) * float(eps), sided)


def dkwm_bound_lambda(lam, sided="two"):
    lam = float(lam)
    if lam < 0.0:
        raise InvalidParameterError("eps must be nonnegative")
    if sided not in ("one", "two"):
        raise InvalidParameterError("sided must be 'one' or 'two'")
    factor = 2.0 if sided == "two" else 1.0
    return min(1.0, factor * math.exp(-2.0 * lam * lam))


def dkwm_epsilon(n, level):
    """Half-width ``eps`` solving ``2 exp(-2 n eps^2) = 1 - level``."""
    level = float(level)
    if not 0.0 < level < 1.0:
        raise InvalidParameterError("invalid level: must lie in (0, 1)")
    if n < 1:
        raise InvalidParameterError("n must be positive")
    return math.sqrt(math.log(2.0 / (1.0 - level)) / (2.0 * n))


def bb_hitting_density(lam, s):
    """Density of the first time a standard Brownian bridge reaches ``-lam``.

    ``lam / sqrt(2 pi) * s^(-3/2) (1-s)^(-1/2) exp(-lam^2 / (2 s (1-s)))``,
    whose total mass on (0, 1) is ``exp(-2 lam^2)``.
    """
    s = float(s)
    lam = float(lam)
    if not 0.0 < s < 1.0:
        raise InvalidParameterError("s outside unit interval")
    if not lam > 0.0:
        raise InvalidParameterError("lam must be positive")
    q = s * (1.0 - s)
    expo = -lam * lam / (2.0 * q)
    if expo < -745.0:
        return 0.0
    return lam / math.sqrt(2.0 * math.pi) * s ** -1.5 * (1.0 - s) ** -0.5 * math.exp(expo)
