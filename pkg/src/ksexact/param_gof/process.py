"""Covariance of the estimated-parameter empirical process and its simulation."""

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .._rng import map_blocks
from ..errors import InvalidParameterError, NumericalError

__all__ = [
    "h_function",
    "sigma_matrix",
    "covariance",
    "CovarianceGrid",
    "build_covariance_grid",
    "simulate_sup_abs",
    "sup_abs_draws",
    "increment_variances",
    "PSD_TOL",
]

PSD_TOL = 1e-8
QUAD_TOL = 1e-10


def _quad(fn, lo, hi):
    res = integrate.quad(fn, lo, hi, epsabs=QUAD_TOL, epsrel=1e-10, limit=200, full_output=1)
    if len(res) == 4:
        raise NumericalError(
            f"quadrature did not converge (achieved abs error {res[1]:.3g}): {res[3]}")
    return res[0]


def _h_quadrature(fam, theta, t):
    if fam.pdf is None:
        raise NumericalError(f"family {fam.name!r} has neither h_closed_form nor pdf")
    lo, hi = fam.support
    t = min(float(t), hi)
    if t <= lo:
        return np.zeros(fam.dim)

    def comp(k):
        return lambda x: float(fam.influence(theta, np.array([x]))[0, k]
                               * fam.pdf(theta, np.array([x]))[0])

    return np.array([_quad(comp(k), lo, t) for k in range(fam.dim)])


def h_function(fam, theta, t):
    """``h(t) = int_{-inf}^t psi(x) dF(x)``.

    Scalar ``t`` gives a vector of length ``dim``; array ``t`` gives shape
    ``(len(t), dim)``. Uses the family's closed form when present.
    """
    theta = np.asarray(theta, dtype=float)
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if fam.h_closed_form is not None:
        out = np.asarray(fam.h_closed_form(theta, ts), dtype=float).reshape(len(ts), fam.dim)
    else:
        out = np.array([_h_quadrature(fam, theta, ti) for ti in ts])
    return out[0] if scalar else out


def _sigma_quadrature(fam, theta):
    if fam.pdf is None:
        raise NumericalError(f"family {fam.name!r} has neither sigma_closed_form nor pdf")
    lo, hi = fam.support
    out = np.empty((fam.dim, fam.dim))
    for a in range(fam.dim):
        for b in range(a, fam.dim):
            def f(x, a=a, b=b):
                psi = fam.influence(theta, np.array([x]))[0]
                return float(psi[a] * psi[b] * fam.pdf(theta, np.array([x]))[0])
            out[a, b] = out[b, a] = _quad(f, lo, hi)
    return out


def sigma_matrix(fam, theta, method="auto"):
    """``Sigma(theta) = E[psi psi']``; ``method`` is "auto", "closed" or "quadrature"."""
    theta = np.asarray(theta, dtype=float)
    if method == "closed" or (method == "auto" and fam.sigma_closed_form is not None):
        sig = np.asarray(fam.sigma_closed_form(theta), dtype=float)
    elif method in ("auto", "quadrature"):
        sig = _sigma_quadrature(fam, theta)
    else:
        raise InvalidParameterError(f"unknown method {method!r}")
    sig = 0.5 * (sig + sig.T)
    if np.linalg.eigvalsh(sig).min() < -PSD_TOL:
        raise NumericalError(f"family misconfigured: Sigma for {fam.name!r} is not PSD")
    return sig


def _kernel(F, D, H, sig):
    """Covariance matrix between point sets described by (F, dF, h) rows."""
    Fs, Ft = F
    Ds, Dt = D
    Hs, Ht = H
    return (np.minimum.outer(Fs, Ft) - np.multiply.outer(Fs, Ft)
            - Ds @ Ht.T - Hs @ Dt.T + Ds @ sig @ Dt.T)


def _pieces(fam, theta, t):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    F = np.asarray(fam.cdf(theta, t), dtype=float)
    D = np.asarray(fam.dcdf_dtheta(theta, t), dtype=float).reshape(len(t), fam.dim)
    H = h_function(fam, theta, t)
    return F, D, H


def covariance(fam, theta, s, t):
    """Limiting ``Cov(Z(s), Z(t))`` of ``sqrt(n)(F_n - F_theta_hat)``."""
    theta = np.asarray(theta, dtype=float)
    Fs, Ds, Hs = _pieces(fam, theta, s)
    Ft, Dt, Ht = _pieces(fam, theta, t)
    sig = sigma_matrix(fam, theta)
    return float(_kernel((Fs, Ft), (Ds, Dt), (Hs, Ht), sig)[0, 0])


@dataclass(frozen=True, eq=False)
class CovarianceGrid:
    grid: np.ndarray
    matrix: np.ndarray
    jitter_applied: float
    min_eigenvalue: float


def build_covariance_grid(fam, theta, grid):
    """Covariance matrix on a strictly increasing grid, jittered if barely indefinite.

    A minimum eigenvalue in ``(-1e-8, 0)`` is lifted by adding
    ``|min eig| + 1e-12`` to the diagonal; anything more negative raises.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or not np.all(np.diff(grid) > 0):
        raise InvalidParameterError("grid must be strictly increasing with at least 2 points")
    theta = np.asarray(theta, dtype=float)
    F, D, H = _pieces(fam, theta, grid)
    sig = sigma_matrix(fam, theta)
    mat = _kernel((F, F), (D, D), (H, H), sig)
    mat = 0.5 * (mat + mat.T)
    min_eig = float(np.linalg.eigvalsh(mat).min())
    if min_eig < -PSD_TOL:
        raise NumericalError(
            f"covariance not PSD (min eigenvalue {min_eig:.3g}); family/theta misconfigured")
    jitter = 0.0
    if min_eig < 0.0:
        jitter = abs(min_eig) + 1e-12
        mat = mat + jitter * np.eye(len(grid))
    return CovarianceGrid(grid, mat, jitter, min_eig)


def _factor(mat):
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        pass
    # Singular but PSD (e.g. the zero matrix): symmetric square root.
    w, v = np.linalg.eigh(mat)
    if w.min() < -PSD_TOL:
        raise NumericalError("not PSD: Cholesky failed after jitter")
    return v * np.sqrt(np.clip(w, 0.0, None))


def increment_variances(mat, idx):
    """Variances of ``Z`` increments across consecutive points of ``idx``.

    The process is taken to vanish at both ends of the grid (the first and
    last intervals start/finish at ``Z = 0``).
    """
    sub = mat[np.ix_(idx, idx)]
    d = np.diag(sub)
    inner = d[:-1] + d[1:] - 2.0 * np.diag(sub, 1)
    return np.clip(np.concatenate(([d[0]], inner, [d[-1]])), 0.0, None)


def _bridge_sup(z, var, rng):
    """Sample ``sup |Z|`` over each interval given its endpoint values.

    Inside an interval with endpoint values ``a, b`` and increment variance
    ``v`` the path is treated as a Brownian bridge, whose maximum is
    ``(a + b + sqrt((a - b)^2 - 2 v log U)) / 2`` for uniform ``U``.
    Upper and lower excursions are drawn independently.
    """
    size = z.shape[0]
    zero = np.zeros((size, 1))
    a = np.hstack((zero, z))
    b = np.hstack((z, zero))
    gap2 = (a - b) ** 2
    up = 0.5 * (a + b + np.sqrt(gap2 - 2.0 * var * np.log(rng.random(a.shape))))
    down = 0.5 * (a + b - np.sqrt(gap2 - 2.0 * var * np.log(rng.random(a.shape))))
    return np.maximum(up.max(axis=1), -down.min(axis=1))


def sup_abs_draws(cg, reps, seed, index_sets=None, workers=1, bridge=False):
    """Sup draws restricted to several index subsets of one simulated path.

    Returns shape ``(reps, len(index_sets))``; every column uses the same
    Gaussian vectors. With ``bridge=True`` each column also accounts for
    excursions between its grid points (see :func:`_bridge_sup`), which
    removes most of the downward bias of a sup taken on a finite grid.
    """
    if reps < 1:
        raise InvalidParameterError("reps must be positive")
    mat = cg.matrix if isinstance(cg, CovarianceGrid) else np.asarray(cg, dtype=float)
    L = _factor(mat)
    G = L.shape[0]
    if index_sets is None:
        index_sets = [np.arange(G)]
    index_sets = [np.arange(G)[idx] for idx in index_sets]
    variances = [increment_variances(mat, idx) for idx in index_sets]

    def block(rng, size):
        z = rng.standard_normal((size, G)) @ L.T
        cols = []
        for idx, var in zip(index_sets, variances):
            if bridge:
                cols.append(_bridge_sup(z[:, idx], var, rng))
            else:
                cols.append(np.abs(z[:, idx]).max(axis=1))
        return np.column_stack(cols)

    return np.concatenate(map_blocks(block, reps, seed, workers=workers, stream=1))


def simulate_sup_abs(cg, reps, seed, workers=1, bridge=False):
    """Draws of ``max_i |Z(t_i)|`` for ``Z ~ N(0, cg.matrix)``.

    ``Z = L e`` with ``L`` the Cholesky factor and ``e`` standard normal.
    Output is ordered by replicate and depends only on ``(seed, reps)``.
    ``bridge=True`` adds the between-point correction of :func:`sup_abs_draws`.
    """
    return sup_abs_draws(cg, reps, seed, workers=workers, bridge=bridge)[:, 0]
