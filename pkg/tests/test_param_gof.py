import dataclasses
import math

import numpy as np
import pytest
from scipy import integrate, stats

from ksexact._rng import block_rng
from ksexact.asymptotic import kolmogorov_series_tail
from ksexact.errors import FitError, InvalidParameterError, NumericalError
from ksexact.oracle import null_calibration
from ksexact.param_gof import (
    EXPONENTIAL,
    NORMAL,
    bootstrap_pvalue,
    build_covariance_grid,
    covariance,
    dbr_pvalue,
    family_from_description,
    get_family,
    gof_statistic,
    h_function,
    register,
    sigma_matrix,
    simulate_sup_abs,
    sup_abs_draws,
)
from ksexact.param_gof import families as fam_mod
from ksexact.param_gof.pvalue import nested_levels

THETAS = {"normal": np.array([1.5, 4.0]), "exponential": np.array([2.5])}


def quad_moment(fam, theta, fn):
    lo, hi = fam.support
    val, _ = integrate.quad(lambda x: fn(x) * fam.pdf(theta, np.array([x]))[0], lo, hi,
                            epsabs=1e-12, limit=200)
    return val


@pytest.fixture(params=["normal", "exponential"])
def fam(request):
    return get_family(request.param)


class TestFamilies:
    def test_influence_mean_zero(self, fam):
        theta = THETAS[fam.name]
        for k in range(fam.dim):
            mean = quad_moment(fam, theta, lambda x: fam.influence(theta, np.array([x]))[0, k])
            assert abs(mean) < 1e-6

    def test_sigma_closed_vs_quadrature(self, fam):
        theta = THETAS[fam.name]
        closed = sigma_matrix(fam, theta, method="closed")
        quad = sigma_matrix(fam, theta, method="quadrature")
        assert np.allclose(closed, quad, rtol=1e-7, atol=1e-9)
        assert np.linalg.eigvalsh(closed).min() >= 0

    def test_normal_sigma_value(self):
        assert np.allclose(sigma_matrix(NORMAL, (0.3, 2.0)), np.diag([2.0, 8.0]))

    def test_exponential_sigma_value(self):
        assert sigma_matrix(EXPONENTIAL, (3.0,))[0, 0] == pytest.approx(9.0)

    def test_sigma_scales_quadratically(self):
        scaled = dataclasses.replace(
            EXPONENTIAL, sigma_closed_form=None,
            influence=lambda th, x: 3.0 * EXPONENTIAL.influence(th, x))
        base = sigma_matrix(EXPONENTIAL, (2.0,), method="quadrature")
        assert sigma_matrix(scaled, (2.0,))[0, 0] == pytest.approx(9 * base[0, 0], rel=1e-8)

    def test_cdf_limits(self, fam):
        theta = THETAS[fam.name]
        t = fam.quantile(theta, np.linspace(0.001, 0.999, 200))
        f = fam.cdf(theta, t)
        assert np.all(np.diff(f) >= 0)
        assert fam.cdf(theta, np.array([1e9]))[0] == 1.0

    def test_dcdf_matches_finite_difference(self, fam):
        theta = THETAS[fam.name]
        t = fam.quantile(theta, np.array([0.1, 0.5, 0.8]))
        grad = fam.dcdf_dtheta(theta, t)
        for k in range(fam.dim):
            step = np.zeros(fam.dim)
            step[k] = 1e-6 * theta[k]
            fd = (fam.cdf(theta + step, t) - fam.cdf(theta - step, t)) / (2 * step[k])
            assert np.allclose(grad[:, k], fd, rtol=1e-6, atol=1e-9)

    def test_degenerate_fit(self):
        with pytest.raises(FitError):
            NORMAL.fit_mle(np.full(10, 3.0))
        with pytest.raises(FitError):
            EXPONENTIAL.fit_mle(np.array([-1.0, 2.0]))

    def test_unknown_family(self):
        with pytest.raises(InvalidParameterError):
            get_family("weibull")


class TestH:
    def test_normal_closed_form_vs_quadrature(self):
        theta = np.array([0.5, 2.25])
        sd = 1.5
        quad_fam = dataclasses.replace(NORMAL, h_closed_form=None)
        for t in (0.5 - sd, 0.5, 0.5 + sd):
            closed = h_function(NORMAL, theta, t)
            assert closed[0] == pytest.approx(-sd * stats.norm.pdf((t - 0.5) / sd), abs=1e-12)
            assert np.allclose(closed, h_function(quad_fam, theta, t), atol=1e-8)

    def test_exponential_median(self):
        theta = np.array([2.0])
        median = math.log(2) / 2.0
        quad_fam = dataclasses.replace(EXPONENTIAL, h_closed_form=None)
        assert np.allclose(h_function(EXPONENTIAL, theta, median),
                           h_function(quad_fam, theta, median), atol=1e-10)

    def test_limits(self, fam):
        theta = THETAS[fam.name]
        assert np.allclose(h_function(fam, theta, np.inf), 0.0, atol=1e-12)
        assert np.allclose(h_function(fam, theta, -np.inf), 0.0, atol=1e-12)

    def test_array_shape(self, fam):
        out = h_function(fam, THETAS[fam.name], np.array([0.5, 1.0, 2.0]))
        assert out.shape == (3, fam.dim)


class TestCovariance:
    def test_symmetric(self, fam):
        theta = THETAS[fam.name]
        pts = fam.quantile(theta, np.array([0.1, 0.35, 0.6, 0.9]))
        for s in pts:
            for t in pts:
                assert covariance(fam, theta, s, t) == pytest.approx(
                    covariance(fam, theta, t, s), abs=1e-15)

    def test_normal_at_median_by_quadrature(self):
        theta = np.array([0.0, 1.0])

        def mom(fn):
            return integrate.quad(lambda x: fn(x) * stats.norm.pdf(x), -np.inf, np.inf,
                                  epsabs=1e-13)[0]

        phi0 = stats.norm.pdf(0)
        h0 = np.array([integrate.quad(lambda x: x * stats.norm.pdf(x), -np.inf, 0)[0],
                       integrate.quad(lambda x: (x * x - 1) * stats.norm.pdf(x), -np.inf, 0)[0]])
        dF0 = np.array([-phi0, 0.0])
        sig = np.array([[mom(lambda x: x * x), mom(lambda x: x * (x * x - 1))],
                        [mom(lambda x: x * (x * x - 1)), mom(lambda x: (x * x - 1) ** 2)]])
        want = 0.25 - 2 * h0 @ dF0 + dF0 @ sig @ dF0
        assert covariance(NORMAL, theta, 0.0, 0.0) == pytest.approx(want, abs=1e-10)
        # estimating the location removes 2/pi of the bridge variance at the median
        assert want == pytest.approx(0.25 - 1 / (2 * math.pi), abs=1e-10)

    def test_variance_below_bridge(self, fam):
        theta = THETAS[fam.name]
        u = np.linspace(0.05, 0.95, 19)
        t = fam.quantile(theta, u)
        var = np.array([covariance(fam, theta, x, x) for x in t])
        assert np.all(var < u * (1 - u))

    def test_wrong_sign_inflates_variance(self, fam):
        theta = THETAS[fam.name]
        flipped = dataclasses.replace(
            fam,
            influence=lambda th, x: -fam.influence(th, x),
            h_closed_form=lambda th, t: -fam.h_closed_form(th, t))
        u = np.linspace(0.1, 0.9, 9)
        t = fam.quantile(theta, u)
        var = np.array([covariance(flipped, theta, x, x) for x in t])
        assert np.all(var > u * (1 - u))

    def test_wrong_sign_miscalibrates(self):
        flipped = dataclasses.replace(
            NORMAL,
            influence=lambda th, x: -NORMAL.influence(th, x),
            h_closed_form=lambda th, t: -NORMAL.h_closed_form(th, t))
        res = null_calibration(flipped, 100, 300, 0.05, method="dbr", seed=3, reps=5000)
        assert res.rate < 0.01


class TestGrid:
    def test_rejects_bad_grid(self):
        with pytest.raises(InvalidParameterError):
            build_covariance_grid(NORMAL, (0, 1), [0.5, 0.5])
        with pytest.raises(InvalidParameterError):
            build_covariance_grid(NORMAL, (0, 1), [0.5])

    def test_not_psd_raises(self):
        broken = dataclasses.replace(EXPONENTIAL, sigma_closed_form=lambda th: np.array([[-1.0]]))
        with pytest.raises(NumericalError, match="misconfigured"):
            sigma_matrix(broken, (1.0,))

    def test_indefinite_grid_raises(self):
        # a covariance that is not a covariance: Sigma tiny, cross terms huge
        broken = dataclasses.replace(
            EXPONENTIAL, h_closed_form=lambda th, t: 50.0 * EXPONENTIAL.h_closed_form(th, t))
        grid = EXPONENTIAL.quantile(np.array([1.0]), np.arange(1, 20) / 20)
        with pytest.raises(NumericalError, match="not PSD"):
            build_covariance_grid(broken, (1.0,), grid)

    def test_nested_levels(self):
        fine, coarse = nested_levels(4)
        assert fine.size == 9
        assert np.allclose(fine[coarse], np.arange(1, 5) / 5)


class TestSimulation:
    def test_zero_matrix(self):
        draws = simulate_sup_abs(np.zeros((5, 5)), 100, seed=1)
        assert np.all(draws == 0)

    def test_bridge_sup_matches_series(self):
        u = np.arange(1, 500) / 500
        mat = np.minimum.outer(u, u) - np.outer(u, u)
        draws = simulate_sup_abs(mat, 100_000, seed=8, workers=4)
        p = float(np.mean(draws > 1.36))
        se = math.sqrt(p * (1 - p) / draws.size)
        assert abs(p - kolmogorov_series_tail(1.36).p) <= 4 * se + 0.01

    def test_bridge_correction_reduces_bias(self):
        u = np.arange(1, 20) / 20
        mat = np.minimum.outer(u, u) - np.outer(u, u)
        target = kolmogorov_series_tail(1.2).p
        plain = np.mean(simulate_sup_abs(mat, 50_000, seed=2) > 1.2)
        bridged = np.mean(simulate_sup_abs(mat, 50_000, seed=2, bridge=True) > 1.2)
        assert abs(bridged - target) < 0.01 < abs(plain - target)

    def test_threads_agree(self):
        u = np.arange(1, 30) / 30
        mat = np.minimum.outer(u, u) - np.outer(u, u)
        a = sup_abs_draws(mat, 30_000, seed=4, index_sets=[slice(None), slice(0, None, 2)],
                          workers=1, bridge=True)
        b = sup_abs_draws(mat, 30_000, seed=4, index_sets=[slice(None), slice(0, None, 2)],
                          workers=5, bridge=True)
        assert a.tobytes() == b.tobytes()


class TestPvalues:
    def test_degenerate_sample(self):
        with pytest.raises(FitError):
            dbr_pvalue(np.full(20, 1.0), NORMAL, reps=1000, seed=1)

    def test_too_small(self):
        with pytest.raises(InvalidParameterError):
            dbr_pvalue([1.0, 2.0], NORMAL, reps=1000, seed=1)

    def test_report_fields(self):
        x = block_rng(0, 0).normal(2, 3, size=80)
        res = dbr_pvalue(x, NORMAL, reps=4000, seed=1)
        assert res.label == "dbr-monte-carlo"
        assert res.err == pytest.approx(math.sqrt(res.p * (1 - res.p) / 4000))
        assert res.details["grid_change"] < 0.005
        assert res.details["grid_points"] == 2 * res.details["grid_size"] + 1

    def test_monotone_in_statistic(self):
        rng = block_rng(1, 0)
        base = rng.normal(size=50)
        samples = [base, np.append(base[:-1], 4.0), np.append(base[:-2], [4.0, 5.0])]
        pairs = [(gof_statistic(s, NORMAL)[1], dbr_pvalue(s, NORMAL, reps=4000, seed=3).p)
                 for s in samples]
        pairs.sort()
        ps = [p for _, p in pairs]
        assert all(a >= b for a, b in zip(ps, ps[1:]))

    def test_location_scale_invariance(self):
        x = block_rng(2, 0).normal(size=70)
        y = 3.7 * x - 12.0
        sx, sy = gof_statistic(x, NORMAL)[1], gof_statistic(y, NORMAL)[1]
        assert sx == pytest.approx(sy, abs=1e-12)
        assert dbr_pvalue(x, NORMAL, reps=3000, seed=5).p == dbr_pvalue(y, NORMAL, reps=3000,
                                                                        seed=5).p

    def test_bootstrap_single_rep(self):
        x = block_rng(3, 0).exponential(size=30)
        assert bootstrap_pvalue(x, EXPONENTIAL, reps=1, seed=1).p in (0.0, 1.0)

    def test_bootstrap_fit_failures(self):
        always_fails = dataclasses.replace(
            NORMAL, sampler=lambda th, size, rng: np.zeros(size))
        with pytest.raises(FitError, match="refit failed"):
            bootstrap_pvalue(block_rng(4, 0).normal(size=20), always_fails, reps=200, seed=1)

    @pytest.mark.xfail(strict=False, reason=(
        "the limit law ignores the O(n^-1/2) finite-sample shift of sqrt(n) D_n; at n=100 "
        "this alone moves mid-range p-values by about 0.04, so the KS distance sits near "
        "0.05-0.07 depending on the seed"))
    def test_dbr_uniform_under_null(self):
        res = null_calibration(NORMAL, 100, 2000, 0.05, method="dbr", seed=99)
        assert stats.kstest(res.pvalues, "uniform").statistic < 0.05

    def test_dbr_uniform_large_n(self):
        res = null_calibration(NORMAL, 1000, 2000, 0.05, method="dbr", seed=99)
        assert stats.kstest(res.pvalues, "uniform").statistic < 0.05

    def test_dbr_agrees_with_bootstrap(self):
        agree = 0
        for i in range(500):
            x = block_rng(77, i, stream=5).normal(size=200)
            a = dbr_pvalue(x, NORMAL, reps=40_000, seed=6).p <= 0.05
            b = bootstrap_pvalue(x, NORMAL, reps=500, seed=1000 + i).p <= 0.05
            agree += a == b
        assert agree / 500 >= 0.9


class TestUserFamilies:
    def test_declarative_quadrature_family(self):
        names = {
            "t.cdf": fam_mod._normal_cdf, "t.dcdf": fam_mod._normal_dcdf,
            "t.psi": fam_mod._normal_influence, "t.sample": fam_mod._normal_sample,
            "t.fit": fam_mod._normal_fit, "t.pdf": fam_mod._normal_pdf,
        }
        for name, fn in names.items():
            register(name)(fn)
        fam = family_from_description({
            "name": "normal-quad", "dim": 2, "cdf": "t.cdf", "dcdf_dtheta": "t.dcdf",
            "influence": "t.psi", "sampler": "t.sample", "fit_mle": "t.fit", "pdf": "t.pdf",
            "param_names": ["mu", "sigma2"],
        })
        theta = np.array([1.0, 0.5])
        grid = NORMAL.quantile(theta, np.arange(1, 21) / 21)
        a = build_covariance_grid(fam, theta, grid).matrix
        b = build_covariance_grid(NORMAL, theta, grid).matrix
        assert np.allclose(a, b, atol=1e-7)

    def test_missing_reference(self):
        with pytest.raises(InvalidParameterError, match="no registered function"):
            family_from_description({"name": "x", "dim": 1, "cdf": "nope", "dcdf_dtheta": "nope",
                                     "influence": "nope", "sampler": "nope", "fit_mle": "nope",
                                     "pdf": "nope"})

    def test_reregister_conflict(self):
        register("t.unique")(len)
        with pytest.raises(InvalidParameterError):
            register("t.unique")(abs)
