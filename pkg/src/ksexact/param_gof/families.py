"""Parametric families with closed-form MLEs and influence functions.

Influence functions follow the convention ``theta_hat - theta =
mean(psi(X_i)) + o_p(n^-1/2)``. With it the limiting covariance is

    F(s^t) - F(s)F(t) - h(t).dF(s) - h(s).dF(t) + dF(s)' Sigma dF(t)

with ``h(t) = E[psi(X) 1{X <= t}]`` and ``Sigma = E[psi psi']``.

User families are assembled from functions registered by name (see
:func:`register` and :func:`family_from_description`); no code is ever
deserialised.
"""

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import optimize
from scipy.special import ndtr, ndtri

from ..errors import FitError, InvalidParameterError

__all__ = [
    "ParametricFamily",
    "NORMAL",
    "EXPONENTIAL",
    "get_family",
    "register",
    "registered",
    "family_from_description",
    "load_family",
]

_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ParametricFamily:
    """A parametric model ``F_theta`` plus everything the tests need.

    Callables take ``theta`` as a 1-D array. Point arguments may be
    arrays; ``dcdf_dtheta``, ``influence`` and ``h_closed_form`` return
    shape ``(len(t), dim)``.

    ``pivotal`` declares that the limiting covariance on the probability
    scale ``u = F_theta(t)`` does not depend on ``theta`` (true for
    location-scale families with equivariant estimators). The Monte Carlo
    p-value then reuses simulations across fits.
    """

    name: str
    dim: int
    cdf: Callable
    dcdf_dtheta: Callable
    influence: Callable
    sampler: Callable
    fit_mle: Callable
    pdf: Optional[Callable] = None
    ppf: Optional[Callable] = None
    support: tuple = (-math.inf, math.inf)
    h_closed_form: Optional[Callable] = None
    sigma_closed_form: Optional[Callable] = None
    pivotal: bool = False
    reference_theta: Optional[tuple] = None
    param_names: tuple = ()

    def quantile(self, theta, u):
        u = np.asarray(u, dtype=float)
        if self.ppf is not None:
            return np.asarray(self.ppf(theta, u), dtype=float)
        lo, hi = self.support
        lo = -1e6 if math.isinf(lo) else lo
        hi = 1e6 if math.isinf(hi) else hi
        return np.array([
            optimize.brentq(lambda t, q=q: float(self.cdf(theta, np.array([t]))[0]) - q,
                            lo, hi, xtol=1e-14)
            for q in u.ravel()
        ]).reshape(u.shape)


def _theta(theta, dim):
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.size != dim:
        raise InvalidParameterError(f"theta must have length {dim}")
    return theta


# normal, theta = (mu, sigma^2)

def _normal_z(theta, t):
    mu, var = _theta(theta, 2)
    if not var > 0:
        raise InvalidParameterError("normal variance must be positive")
    sd = math.sqrt(var)
    return (np.asarray(t, dtype=float) - mu) / sd, sd


def _phi(z):
    return np.exp(-0.5 * z * z) / _SQRT2PI


def _phi_terms(z):
    # phi(z) and z phi(z), both zero at z = +-inf
    z = np.atleast_1d(z)
    safe = np.where(np.isfinite(z), z, 0.0)
    ok = np.isfinite(z)
    dens = np.where(ok, _phi(safe), 0.0)
    return dens, np.where(ok, safe * dens, 0.0)


def _normal_cdf(theta, t):
    z, _ = _normal_z(theta, t)
    return ndtr(z)


def _normal_pdf(theta, t):
    z, sd = _normal_z(theta, t)
    return _phi(z) / sd


def _normal_ppf(theta, u):
    mu, var = _theta(theta, 2)
    return mu + math.sqrt(var) * ndtri(u)


def _normal_dcdf(theta, t):
    z, sd = _normal_z(theta, t)
    dens, zd = _phi_terms(z)
    return np.column_stack((-dens / sd, -zd / (2.0 * sd * sd)))


def _normal_influence(theta, x):
    mu, var = _theta(theta, 2)
    d = np.atleast_1d(np.asarray(x, dtype=float)) - mu
    return np.column_stack((d, d * d - var))


def _normal_h(theta, t):
    z, sd = _normal_z(theta, t)
    dens, zd = _phi_terms(z)
    return np.column_stack((-sd * dens, -sd * sd * zd))


def _normal_sigma(theta):
    _, var = _theta(theta, 2)
    return np.diag([var, 2.0 * var * var])


def _normal_sample(theta, size, rng):
    mu, var = _theta(theta, 2)
    return rng.normal(mu, math.sqrt(var), size=size)


def _normal_fit(values):
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise FitError("normal fit needs at least two observations")
    mu = float(np.mean(x))
    var = float(np.mean((x - mu) ** 2))
    if not var > 0.0:
        raise FitError("degenerate sample: MLE variance is zero")
    return np.array([mu, var])


NORMAL = ParametricFamily(
    name="normal",
    dim=2,
    cdf=_normal_cdf,
    dcdf_dtheta=_normal_dcdf,
    influence=_normal_influence,
    sampler=_normal_sample,
    fit_mle=_normal_fit,
    pdf=_normal_pdf,
    ppf=_normal_ppf,
    h_closed_form=_normal_h,
    sigma_closed_form=_normal_sigma,
    pivotal=True,
    reference_theta=(0.0, 1.0),
    param_names=("mu", "sigma2"),
)


# exponential, theta = (rate,)

def _rate(theta):
    (rate,) = _theta(theta, 1)
    if not rate > 0:
        raise InvalidParameterError("exponential rate must be positive")
    return rate


def _expon_cdf(theta, t):
    rate = _rate(theta)
    t = np.asarray(t, dtype=float)
    return np.where(t > 0, -np.expm1(-rate * np.maximum(t, 0.0)), 0.0)


def _expon_pdf(theta, t):
    rate = _rate(theta)
    t = np.asarray(t, dtype=float)
    return np.where(t >= 0, rate * np.exp(-rate * np.maximum(t, 0.0)), 0.0)


def _expon_ppf(theta, u):
    return -np.log1p(-np.asarray(u, dtype=float)) / _rate(theta)


def _t_exp(rate, t):
    # t * exp(-rate t), zero outside (0, inf) including t = +inf
    t = np.atleast_1d(np.asarray(t, dtype=float))
    ok = np.isfinite(t) & (t > 0)
    safe = np.where(ok, t, 0.0)
    return np.where(ok, safe * np.exp(-rate * safe), 0.0)


def _expon_dcdf(theta, t):
    return _t_exp(_rate(theta), t)[:, None]


def _expon_influence(theta, x):
    rate = _rate(theta)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return (rate - rate * rate * x)[:, None]


def _expon_h(theta, t):
    rate = _rate(theta)
    return (rate * rate * _t_exp(rate, t))[:, None]


def _expon_sigma(theta):
    return np.array([[_rate(theta) ** 2]])


def _expon_sample(theta, size, rng):
    return rng.exponential(1.0 / _rate(theta), size=size)


def _expon_fit(values):
    x = np.asarray(values, dtype=float)
    if x.size < 1:
        raise FitError("exponential fit needs observations")
    if np.any(x < 0):
        raise FitError("exponential fit needs nonnegative observations")
    mean = float(np.mean(x))
    if not mean > 0.0:
        raise FitError("degenerate sample: mean is zero")
    return np.array([1.0 / mean])


EXPONENTIAL = ParametricFamily(
    name="exponential",
    dim=1,
    cdf=_expon_cdf,
    dcdf_dtheta=_expon_dcdf,
    influence=_expon_influence,
    sampler=_expon_sample,
    fit_mle=_expon_fit,
    pdf=_expon_pdf,
    ppf=_expon_ppf,
    support=(0.0, math.inf),
    h_closed_form=_expon_h,
    sigma_closed_form=_expon_sigma,
    pivotal=True,
    reference_theta=(1.0,),
    param_names=("rate",),
)

_BUILTIN = {"normal": NORMAL, "exponential": EXPONENTIAL}


def get_family(name):
    try:
        return _BUILTIN[name]
    except KeyError:
        raise InvalidParameterError(
            f"unknown family {name!r}; builtins are {sorted(_BUILTIN)}") from None


_REGISTRY = {}


def register(name):
    """Decorator registering a callable under ``name`` for declarative families."""
    def deco(fn):
        if name in _REGISTRY and _REGISTRY[name] is not fn:
            raise InvalidParameterError(f"{name!r} already registered")
        _REGISTRY[name] = fn
        return fn
    return deco


def registered():
    return dict(_REGISTRY)


_REQUIRED = ("cdf", "dcdf_dtheta", "influence", "sampler", "fit_mle")
_OPTIONAL = ("pdf", "ppf", "h_closed_form", "sigma_closed_form")


def family_from_description(desc):
    """Build a family from a mapping whose callables are registry names.

    Example::

        {"name": "weibull", "dim": 2, "cdf": "weibull.cdf", ...,
         "support": [0, "inf"]}
    """
    def lookup(key):
        ref = desc[key]
        if ref not in _REGISTRY:
            raise InvalidParameterError(f"{key}: no registered function {ref!r}")
        return _REGISTRY[ref]

    missing = [k for k in ("name", "dim", *_REQUIRED) if k not in desc]
    if missing:
        raise InvalidParameterError(f"family description missing {missing}")
    if "h_closed_form" not in desc and "pdf" not in desc:
        raise InvalidParameterError("need pdf for quadrature when h_closed_form is absent")
    kwargs = {k: lookup(k) for k in _REQUIRED}
    kwargs.update({k: lookup(k) for k in _OPTIONAL if k in desc})
    support = tuple(float(s) for s in desc.get("support", ("-inf", "inf")))
    ref = desc.get("reference_theta")
    return ParametricFamily(
        name=str(desc["name"]),
        dim=int(desc["dim"]),
        support=support,
        pivotal=bool(desc.get("pivotal", False)),
        reference_theta=tuple(ref) if ref is not None else None,
        param_names=tuple(desc.get("param_names", ())),
        **kwargs,
    )


def load_family(path):
    with open(path, encoding="utf-8") as fh:
        return family_from_description(json.load(fh))
