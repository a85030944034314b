"""KS goodness-of-fit p-values when the parameters are fitted from the data."""

import functools
import math

import numpy as np

from .._rng import map_blocks
from ..asymptotic import Method, TailResult
from ..empirical import as_sample, ks_one_sample, ks_one_sample_sorted
from ..errors import FitError, InvalidParameterError
from .process import build_covariance_grid, sup_abs_draws

__all__ = [
    "DEFAULT_GRID_SIZE",
    "GRID_CHANGE_TOL",
    "DEFAULT_REPS",
    "gof_statistic",
    "nested_levels",
    "dbr_pvalue",
    "bootstrap_pvalue",
]

DEFAULT_GRID_SIZE = 100
GRID_CHANGE_TOL = 0.005
DEFAULT_REPS = 40_000
MAX_FIT_FAILURE_RATE = 0.01


def gof_statistic(sample, fam):
    """Fit ``theta_hat`` and return ``(theta_hat, sqrt(n) D_n(theta_hat))``."""
    sample = as_sample(sample)
    if sample.n < fam.dim + 1:
        raise InvalidParameterError(f"need at least {fam.dim + 1} observations")
    theta = np.asarray(fam.fit_mle(sample.values), dtype=float)
    stats = ks_one_sample(sample, lambda t: fam.cdf(theta, t))
    return theta, math.sqrt(sample.n) * stats.d


def nested_levels(grid_size):
    """Probability levels ``i/(2G+2)``; the even ``i`` are the ``G`` levels ``k/(G+1)``."""
    fine = np.arange(1, 2 * grid_size + 2) / (2 * grid_size + 2)
    coarse_idx = np.arange(1, 2 * grid_size + 1, 2)
    return fine, coarse_idx


def _draws(fam, theta, grid_size, reps, seed, workers, bridge):
    """Sup draws on the fine grid (column 0) and its coarse half (column 1)."""
    levels, coarse_idx = nested_levels(grid_size)
    cg = build_covariance_grid(fam, theta, fam.quantile(theta, levels))
    draws = sup_abs_draws(cg, reps, seed, index_sets=[slice(None), coarse_idx],
                          workers=workers, bridge=bridge)
    draws.flags.writeable = False
    return draws, cg.jitter_applied


@functools.lru_cache(maxsize=8)
def _pivotal_draws(fam, grid_size, reps, seed, bridge):
    theta = np.asarray(fam.reference_theta, dtype=float)
    return _draws(fam, theta, grid_size, reps, seed, 1, bridge)


def dbr_pvalue(sample, fam, grid_size=DEFAULT_GRID_SIZE, reps=DEFAULT_REPS, seed=None,
               workers=1, grid_change_tol=GRID_CHANGE_TOL, bridge=True):
    """Asymptotic p-value of ``sqrt(n) D_n(theta_hat)`` by Gaussian-process Monte Carlo.

    The limiting Gaussian process is drawn on the ``2G+1`` probability
    levels ``i/(2G+2)`` at ``theta_hat`` quantiles; the even levels form
    the ``G``-point grid ``k/(G+1)``, so both sups come from the same
    paths. With ``bridge=True`` each path is completed between grid points
    by Brownian-bridge maxima (see ``sup_abs_draws``); ``bridge=False``
    uses the plain grid sup, which is biased low. If the two answers differ
    by ``grid_change_tol`` or more, ``G`` is doubled once. The finer answer
    is reported and ``details["grid_change"]`` holds the final difference.

    For families declared ``pivotal`` the covariance on the probability
    scale is the same for every ``theta``, so draws are simulated at
    ``fam.reference_theta`` and cached per ``(grid_size, reps, seed)``.
    """
    sample = as_sample(sample)
    theta, observed = gof_statistic(sample, fam)
    G = int(grid_size)
    if G < 1:
        raise InvalidParameterError("grid_size must be positive")
    for attempt in range(2):
        if fam.pivotal and fam.reference_theta is not None and seed is not None:
            draws, jitter = _pivotal_draws(fam, G, int(reps), int(seed), bool(bridge))
        else:
            draws, jitter = _draws(fam, theta, G, int(reps), seed, workers, bridge)
        p = float(np.mean(draws[:, 0] > observed))
        p_coarse = float(np.mean(draws[:, 1] > observed))
        change = abs(p - p_coarse)
        if change < grid_change_tol or attempt == 1:
            break
        G *= 2
    notes = ()
    if change >= grid_change_tol:
        notes = (f"grid change {change:.4f} still above {grid_change_tol} after doubling",)
    se = math.sqrt(p * (1.0 - p) / reps)
    return TailResult(
        p, Method.MONTE_CARLO, err=se, label="dbr-monte-carlo",
        notes=notes,
        details={
            "theta_hat": theta.tolist(),
            "statistic": observed,
            "grid_size": G,
            "grid_points": 2 * G + 1,
            "grid_change": change,
            "jitter": jitter,
            "reps": int(reps),
            "bridge": bool(bridge),
        },
    )


def bootstrap_pvalue(sample, fam, reps=1000, seed=None, workers=1):
    """Parametric bootstrap p-value, refitting ``theta`` on every resample.

    ``p`` is the fraction of bootstrap statistics ``>=`` the observed one.
    Resamples whose fit fails are dropped; more than 1% failures raise.
    """
    sample = as_sample(sample)
    theta, observed = gof_statistic(sample, fam)
    n = sample.n
    root_n = math.sqrt(n)

    def block(rng, size):
        x = np.sort(np.asarray(fam.sampler(theta, (size, n), rng), dtype=float), axis=1)
        out = np.full(size, np.nan)
        for r in range(size):
            try:
                th = fam.fit_mle(x[r])
            except FitError:
                continue
            u = np.asarray(fam.cdf(np.asarray(th, dtype=float), x[r]), dtype=float)
            d_plus, d_minus = ks_one_sample_sorted(u)
            out[r] = root_n * max(d_plus, d_minus)
        return out

    stats = np.concatenate(map_blocks(block, int(reps), seed, workers=workers, stream=2))
    failures = int(np.count_nonzero(np.isnan(stats)))
    if failures > MAX_FIT_FAILURE_RATE * reps:
        raise FitError(f"bootstrap refit failed in {failures} of {reps} resamples")
    ok = stats[~np.isnan(stats)]
    p = float(np.mean(ok >= observed))
    return TailResult(
        p, Method.MONTE_CARLO, err=math.sqrt(p * (1.0 - p) / ok.size),
        label="parametric-bootstrap",
        details={"theta_hat": theta.tolist(), "statistic": observed,
                 "reps": int(reps), "fit_failures": failures},
    )
