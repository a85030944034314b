"""Exact law of the one-sided one-sample statistic and of its hitting time.

Work on the uniform scale throughout: for continuous ``F`` the laws of
``D_n^+`` and ``D_n^-`` do not depend on ``F``, and the two coincide, so
:func:`sbt_tail` serves both sides.

The normalized process ``Z_n = sqrt(n)(F_n - t)`` decreases between jumps
and can first reach ``-lambda`` only at times ``eps + j/n`` with
``eps = lambda / sqrt(n)``; :func:`tau_law` gives the pmf on that support
together with the mass of never hitting.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._numeric import clamp01, compensated_sum, log_binom
from .errors import InvalidParameterError

__all__ = [
    "sbt_tail",
    "tau_pmf",
    "tau_law",
    "support_max",
    "birnbaum_integral",
    "HittingTimeLaw",
    "Atom",
]

FLOOR_NUDGE = 1e-12


def _check_n(n):
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidParameterError(f"n must be a positive integer, got {n!r}")
    return int(n)


def _check_eps(eps):
    eps = float(eps)
    if not 0.0 <= eps <= 1.0:
        raise InvalidParameterError(f"invalid epsilon {eps!r}: must lie in [0, 1]")
    return eps


def _resolve_eps(n, lam, eps):
    if (lam is None) == (eps is None):
        raise InvalidParameterError("give exactly one of lam and eps")
    if eps is not None:
        return _check_eps(eps)
    lam = float(lam)
    if not 0.0 <= lam <= math.sqrt(n):
        raise InvalidParameterError(f"invalid lambda {lam!r}: must lie in [0, sqrt(n)]")
    return min(1.0, lam / math.sqrt(n))


def support_max(n, eps):
    """Largest hitting index ``floor(n (1 - eps))`` with a small upward nudge."""
    return int(math.floor(n * (1.0 - eps) + FLOOR_NUDGE))


def _upper_base(n, eps, j):
    # 1 - eps - j/n written to avoid cancellation; tiny negatives from the
    # floor nudge are true zeros.
    return np.maximum(((n - j) - n * eps) / n, 0.0)


def sbt_tail(n, eps):
    """``P(D_n^- > eps)`` for a sample of size ``n`` from a continuous law.

    Evaluates ``(1-eps)^n + eps * sum_{j=1}^{floor(n(1-eps))} C(n,j)
    (eps + j/n)^(j-1) (1 - eps - j/n)^(n-j)`` with every term in log space
    and a compensated sum, then clamps to [0, 1].
    """
    n = _check_n(n)
    eps = _check_eps(eps)
    if eps == 0.0:
        return 1.0
    if eps == 1.0:
        return 0.0
    head = math.exp(n * math.log1p(-eps))
    jmax = support_max(n, eps)
    if jmax < 1:
        return clamp01(head)
    j = np.arange(1, jmax + 1, dtype=float)
    base = _upper_base(n, eps, j)
    # the masked j = n entry is 0 * log(0)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_base = np.where(n - j > 0, (n - j) * np.log(base), 0.0)
    log_terms = (math.log(eps) + log_binom(n, j)
                 + (j - 1.0) * np.log(eps + j / n) + log_base)
    terms = np.exp(log_terms)
    return clamp01(compensated_sum([head, *terms.tolist()]))


def tau_pmf(n, lam, j, eps=None):
    """``P(tau_n(lam) = eps + j/n)`` for the uniform empirical process.

    Pass ``lam=None, eps=...`` to work directly with ``eps``. The ``j = 0``
    term is ``(1 - eps)^n``; a zero base with positive exponent gives 0.
    """
    n = _check_n(n)
    eps = _resolve_eps(n, lam, eps)
    if isinstance(j, bool) or int(j) != j:
        raise InvalidParameterError("j must be an integer")
    j = int(j)
    if not 0 <= j <= support_max(n, eps):
        raise InvalidParameterError(f"out-of-support index j={j}")
    if j == 0:
        return math.exp(n * math.log1p(-eps)) if eps < 1.0 else 0.0
    if eps == 0.0:
        return 0.0
    base = float(_upper_base(n, eps, j))
    if base == 0.0 and n - j > 0:
        return 0.0
    log_p = (math.log(eps) + log_binom(n, j) + (j - 1) * math.log(eps + j / n)
             + ((n - j) * math.log(base) if n > j else 0.0))
    return clamp01(math.exp(log_p))


class Atom(NamedTuple):
    j: int
    support_point: float
    prob: float


@dataclass(frozen=True)
class HittingTimeLaw:
    n: int
    lam: float
    epsilon: float
    atoms: tuple
    prob_infinity: float

    @property
    def probs(self):
        return np.array([a.prob for a in self.atoms])

    def as_dict(self):
        return {
            "n": self.n,
            "lambda": self.lam,
            "epsilon": self.epsilon,
            "atoms": [{"j": a.j, "support_point": a.support_point, "prob": a.prob}
                      for a in self.atoms],
            "prob_infinity": self.prob_infinity,
        }


def tau_law(n, lam=None, eps=None):
    """Full hitting-time law, atoms in ascending ``j``."""
    n = _check_n(n)
    eps = _resolve_eps(n, lam, eps)
    lam = eps * math.sqrt(n) if lam is None else float(lam)
    atoms = tuple(
        Atom(j, eps + j / n, tau_pmf(n, None, j, eps=eps))
        for j in range(support_max(n, eps) + 1)
    )
    finite = compensated_sum(a.prob for a in atoms)
    return HittingTimeLaw(n, lam, eps, atoms, clamp01(1.0 - finite))


def birnbaum_integral(eps, j, n):
    """Volume ``eps (eps + j/n)^(j-1) / j!`` of the staircase region.

    This is the ``j``-fold nested integral
    ``int_0^eps int_{x1}^{eps+1/n} ... int_{x_{j-1}}^{eps+(j-1)/n} dx_j...dx_1``;
    the empty integral (``j = 0``) is 1.
    """
    eps = float(eps)
    n = _check_n(n)
    if eps < 0.0:
        raise InvalidParameterError("eps must be nonnegative")
    if j < 0:
        raise InvalidParameterError("j must be nonnegative")
    if j == 0:
        return 1.0
    if eps == 0.0:
        return 0.0
    return math.exp(math.log(eps) + (j - 1) * math.log(eps + j / n) - math.lgamma(j + 1))
