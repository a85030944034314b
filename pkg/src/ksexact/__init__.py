"""Exact and asymptotic distributions for Kolmogorov-Smirnov statistics."""

from .asymptotic import (
    Method,
    TailResult,
    bb_hitting_density,
    dkwm_bound,
    dkwm_bound_lambda,
    dkwm_epsilon,
    kolmogorov_critical,
    kolmogorov_series_tail,
    one_sided_asymptotic_tail,
    two_sample_asymptotic_pvalue,
)
from .empirical import (
    ConfidenceBand,
    KsStatistics,
    Sample,
    as_sample,
    dkwm_band,
    ecdf_eval,
    ks_one_sample,
    ks_two_sample,
)
from .errors import DataError, FitError, InvalidParameterError, KsError, NumericalError
from .exact_one_sample import HittingTimeLaw, birnbaum_integral, sbt_tail, tau_law, tau_pmf
from .exact_two_sample import (
    LatticeQuery,
    feller_asymptotic_tail,
    feller_sandwich,
    feller_tail,
    grf_tail,
    two_sample_exact_pvalue,
)

__version__ = "0.1.0"
