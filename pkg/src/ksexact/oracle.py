"""Brute-force oracles for the exact and asymptotic engines.

Nothing here reuses formula code from the engines it checks: one-sample
tails and hitting times are simulated from uniform order statistics,
two-sample laws by walking every interleaving, and the estimated-parameter
p-values by simulating data under a fixed null.
"""

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._rng import block_rng, map_blocks
from .empirical import Sample, ks_one_sample_sorted
from .errors import FitError, InvalidParameterError

__all__ = [
    "McEstimate",
    "HittingFrequencies",
    "CalibrationResult",
    "mc_one_sample_tail",
    "mc_hitting_time",
    "mc_two_sample_tail",
    "enumerate_interleavings",
    "interleaving_tail",
    "null_calibration",
]

MIN_REPS = 1000


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    se: float
    reps: int
    seed: int | None

    @classmethod
    def from_count(cls, hits, reps, seed):
        p = hits / reps
        return cls(p, math.sqrt(p * (1.0 - p) / reps), reps, seed)

    def as_dict(self):
        return {"estimate": self.estimate, "se": self.se, "reps": self.reps, "seed": self.seed}


def _sorted_uniforms(rng, size, n):
    return np.sort(rng.random((size, n)), axis=1)


def mc_one_sample_tail(n, eps, side="minus", reps=10**6, seed=None, workers=1):
    """Frequency of ``D_n^side > eps`` over simulated uniform samples."""
    if reps < MIN_REPS:
        raise InvalidParameterError(f"reps must be at least {MIN_REPS}")
    if side not in ("minus", "plus", "two"):
        raise InvalidParameterError("side must be 'minus', 'plus' or 'two'")

    def block(rng, size):
        d_plus, d_minus = ks_one_sample_sorted(_sorted_uniforms(rng, size, n))
        stat = {"plus": d_plus, "minus": d_minus}.get(side)
        if stat is None:
            stat = np.maximum(d_plus, d_minus)
        return int(np.count_nonzero(stat > eps))

    hits = sum(map_blocks(block, reps, seed, workers=workers))
    return McEstimate.from_count(hits, reps, seed)


@dataclass(frozen=True, eq=False)
class HittingFrequencies:
    """Observed first-hit indices ``j`` (time ``eps + j/n``) and misses."""

    n: int
    epsilon: float
    reps: int
    seed: int | None
    counts: np.ndarray
    infinity_count: int
    off_support: int

    @property
    def pmf(self):
        return self.counts / self.reps

    @property
    def se(self):
        p = self.pmf
        return np.sqrt(p * (1.0 - p) / self.reps)

    @property
    def prob_infinity(self):
        return self.infinity_count / self.reps


def mc_hitting_time(n, lam=None, reps=10**6, seed=None, eps=None, workers=1):
    """Simulate the first time ``sqrt(n)(F_n(t) - t)`` reaches ``-lam``.

    Between jumps the process is ``k/n - t`` on ``[U_(k), U_(k+1))``, so it
    reaches ``-eps`` inside that interval exactly when the root
    ``t* = k/n + eps`` lies in it. The first such interval gives the hit;
    the recorded index is the number of observations at or below ``t*``,
    and any root not of the form ``eps + j/n`` counts as off-support.
    """
    if (lam is None) == (eps is None):
        raise InvalidParameterError("give exactly one of lam and eps")
    eps = float(eps) if eps is not None else float(lam) / math.sqrt(n)
    if not 0.0 < eps <= 1.0:
        raise InvalidParameterError("need 0 < lam <= sqrt(n)")
    if reps < MIN_REPS:
        raise InvalidParameterError(f"reps must be at least {MIN_REPS}")
    kmax = int(math.floor(n * (1.0 - eps) + 1e-12))
    k = np.arange(n + 1)
    roots = k / n + eps

    def block(rng, size):
        u = _sorted_uniforms(rng, size, n)
        left = np.hstack((np.zeros((size, 1)), u))
        right = np.hstack((u, np.full((size, 1), np.inf)))
        inside = (left <= roots) & (roots < right) & (roots <= 1.0)
        hit = inside.any(axis=1)
        first = np.argmax(inside, axis=1)
        t_star = roots[first[hit]]
        observed_j = np.sum(u[hit] <= t_star[:, None], axis=1)
        off = int(np.count_nonzero(np.abs(t_star - eps - observed_j / n) > 1e-9))
        counts = np.bincount(observed_j, minlength=n + 1)
        return counts, int(size - np.count_nonzero(hit)), off

    parts = map_blocks(block, reps, seed, workers=workers)
    counts = sum(p[0] for p in parts)
    off = sum(p[2] for p in parts) + int(counts[kmax + 1:].sum())
    return HittingFrequencies(n, eps, reps, seed, counts[:kmax + 1].copy(),
                              sum(p[1] for p in parts), off)


def mc_two_sample_tail(n, m, d, reps=10**5, seed=None, statistic="d", strict=True,
                       workers=1):
    """Frequency of the two-sample statistic exceeding ``d`` under the null.

    Samples a uniformly random interleaving per replicate (labels of a
    random permutation) and walks ``+1/n`` per x, ``-1/m`` per y.
    """
    if statistic not in ("d", "d_plus"):
        raise InvalidParameterError("statistic must be 'd' or 'd_plus'")
    if reps < MIN_REPS:
        raise InvalidParameterError(f"reps must be at least {MIN_REPS}")
    scale = n * m
    threshold = d * scale

    def block(rng, size):
        is_x = rng.random((size, n + m)).argsort(axis=1) < n
        h = np.cumsum(np.where(is_x, m, -n), axis=1)
        if statistic == "d_plus":
            stat = np.maximum(h.max(axis=1), 0)
        else:
            stat = np.abs(h).max(axis=1)
        hits = stat > threshold + 1e-9 if strict else stat >= threshold - 1e-9
        return int(np.count_nonzero(hits))

    hits = sum(map_blocks(block, reps, seed, workers=workers))
    return McEstimate.from_count(hits, reps, seed)


def enumerate_interleavings(n, m, statistic="d_plus", cap=10**7):
    """Exact law of ``D^+`` or ``D`` by listing all ``C(n+m, n)`` interleavings.

    Returns a dict mapping each attained level (a Fraction) to its
    probability (a Fraction), in increasing level order.
    """
    if statistic not in ("d", "d_plus"):
        raise InvalidParameterError("statistic must be 'd' or 'd_plus'")
    total = math.comb(n + m, n)
    if total > cap:
        raise InvalidParameterError(
            f"{total} interleavings exceed cap {cap}; use the path-counting mode in "
            "exact_two_sample.paths_reaching instead")
    levels = Counter()
    for xs in itertools.combinations(range(n + m), n):
        xs = set(xs)
        h = best = 0
        for pos in range(n + m):
            h += m if pos in xs else -n
            best = max(best, h if statistic == "d_plus" else abs(h))
        levels[Fraction(best, n * m)] += 1
    return {lvl: Fraction(c, total) for lvl, c in sorted(levels.items())}


def interleaving_tail(dist, level):
    """``P(stat >= level)`` from an :func:`enumerate_interleavings` law."""
    return sum((p for lvl, p in dist.items() if lvl >= level), Fraction(0))


@dataclass(frozen=True, eq=False)
class CalibrationResult:
    rate: float
    rejections: int
    n_replicates: int
    failures: int
    pvalues: np.ndarray
    grid_changes: np.ndarray

    def as_dict(self):
        return {"rate": self.rate, "rejections": self.rejections,
                "n_replicates": self.n_replicates, "failures": self.failures,
                "max_grid_change": float(self.grid_changes.max(initial=0.0))}


def null_calibration(fam, n, n_replicates, alpha, method="dbr", seed=0, theta0=None,
                     reps=None, grid_size=None, workers=1):
    """Rejection rate at level ``alpha`` for data simulated from ``fam`` at ``theta0``.

    ``dbr`` replicates share one Monte Carlo seed (the limit law does not
    depend on the data), bootstrap replicates get independent streams.
    A replicate rejects when ``p <= alpha``; level 0 never rejects.
    """
    from .param_gof.pvalue import DEFAULT_GRID_SIZE, DEFAULT_REPS, bootstrap_pvalue, dbr_pvalue

    if n_replicates < 100:
        raise InvalidParameterError("n_replicates must be at least 100")
    if method not in ("dbr", "bootstrap"):
        raise InvalidParameterError("method must be 'dbr' or 'bootstrap'")
    if not 0.0 <= alpha <= 1.0:
        raise InvalidParameterError("alpha must lie in [0, 1]")
    theta0 = np.asarray(theta0 if theta0 is not None else fam.reference_theta, dtype=float)
    grid_size = grid_size or DEFAULT_GRID_SIZE
    pvals, changes, failures = [], [], 0
    for i in range(n_replicates):
        x = fam.sampler(theta0, n, block_rng(seed, i, stream=3))
        sample = Sample.from_data(x)
        try:
            if method == "dbr":
                res = dbr_pvalue(sample, fam, grid_size=grid_size, reps=reps or DEFAULT_REPS,
                                 seed=seed, workers=workers)
                changes.append(res.details["grid_change"])
            else:
                sub = int(np.random.SeedSequence(seed, spawn_key=(4, i)).generate_state(1)[0])
                res = bootstrap_pvalue(sample, fam, reps=reps or 500, seed=sub,
                                       workers=workers)
        except FitError:
            failures += 1
            continue
        pvals.append(res.p)
    pvals = np.array(pvals)
    rejections = int(np.count_nonzero(pvals <= alpha)) if alpha > 0 else 0
    done = len(pvals)
    return CalibrationResult(rejections / done if done else float("nan"), rejections,
                             n_replicates, failures, pvals, np.array(changes))
