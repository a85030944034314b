import ast
import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from ksexact import oracle
from ksexact.errors import InvalidParameterError
from ksexact.oracle import (
    enumerate_interleavings,
    interleaving_tail,
    mc_hitting_time,
    mc_one_sample_tail,
    mc_two_sample_tail,
    null_calibration,
)
from ksexact.param_gof import get_family


class TestOneSampleMc:
    @pytest.mark.parametrize("n, eps, want", [(1, 0.3, 0.7), (2, 0.5, 0.25)])
    def test_examples(self, n, eps, want):
        est = mc_one_sample_tail(n, eps, reps=200_000, seed=1)
        assert abs(est.estimate - want) <= 4 * est.se

    def test_eps_one_never_exceeded(self):
        assert mc_one_sample_tail(4, 1.0, reps=5000, seed=2).estimate == 0.0

    def test_minimum_reps(self):
        with pytest.raises(InvalidParameterError, match="at least"):
            mc_one_sample_tail(3, 0.2, reps=999)

    def test_bad_side(self):
        with pytest.raises(InvalidParameterError):
            mc_one_sample_tail(3, 0.2, side="left", reps=1000)

    def test_se_from_estimate(self):
        est = mc_one_sample_tail(5, 0.2, reps=8000, seed=3)
        assert est.se == math.sqrt(est.estimate * (1 - est.estimate) / est.reps)

    def test_sides_are_symmetric(self):
        plus = mc_one_sample_tail(6, 0.25, side="plus", reps=100_000, seed=4)
        minus = mc_one_sample_tail(6, 0.25, side="minus", reps=100_000, seed=5)
        two = mc_one_sample_tail(6, 0.25, side="two", reps=100_000, seed=6)
        assert abs(plus.estimate - minus.estimate) <= 4 * math.hypot(plus.se, minus.se)
        assert two.estimate >= max(plus.estimate, minus.estimate) - 4 * two.se

    def test_workers_do_not_change_result(self):
        a = mc_one_sample_tail(7, 0.2, reps=30_000, seed=8, workers=1)
        b = mc_one_sample_tail(7, 0.2, reps=30_000, seed=8, workers=3)
        assert a == b


class TestHitting:
    def test_accounting(self):
        hf = mc_hitting_time(12, eps=0.2, reps=20_000, seed=9)
        assert int(hf.counts.sum()) + hf.infinity_count == hf.reps
        assert hf.off_support == 0
        assert hf.pmf.shape == hf.se.shape

    def test_n1(self):
        # one point: the process hits -eps at t = eps iff U > eps
        hf = mc_hitting_time(1, eps=0.3, reps=50_000, seed=10)
        assert abs(hf.pmf[0] - 0.7) <= 4 * hf.se[0]
        assert abs(hf.prob_infinity - 0.3) <= 4 * math.sqrt(0.21 / hf.reps)

    def test_lambda_or_eps(self):
        with pytest.raises(InvalidParameterError):
            mc_hitting_time(5, lam=0.5, eps=0.2, reps=1000)
        with pytest.raises(InvalidParameterError):
            mc_hitting_time(5, reps=1000)
        with pytest.raises(InvalidParameterError):
            mc_hitting_time(4, lam=3.0, reps=1000)


class TestEnumeration:
    def test_two_by_two(self):
        law = enumerate_interleavings(2, 2)
        assert interleaving_tail(law, Fraction(1, 2)) == Fraction(4, 6)
        assert sum(law.values()) == 1

    def test_one_by_one(self):
        law = enumerate_interleavings(1, 1)
        assert law == {Fraction(0): Fraction(1, 2), Fraction(1): Fraction(1, 2)}
        two_sided = enumerate_interleavings(1, 1, "d")
        assert two_sided == {Fraction(1): Fraction(1)}

    def test_levels_sorted(self):
        law = enumerate_interleavings(3, 4, "d")
        levels = list(law)
        assert levels == sorted(levels)
        assert interleaving_tail(law, 0) == 1

    def test_cap(self):
        with pytest.raises(InvalidParameterError, match="exceed cap"):
            enumerate_interleavings(10, 10, cap=1000)

    def test_bad_statistic(self):
        with pytest.raises(InvalidParameterError):
            enumerate_interleavings(2, 2, "d_minus")


class TestTwoSampleMc:
    def test_matches_enumeration(self):
        law = enumerate_interleavings(4, 3, "d")
        level = Fraction(1, 2)
        want = float(interleaving_tail(law, level))
        est = mc_two_sample_tail(4, 3, level, reps=100_000, seed=11, strict=False)
        assert abs(est.estimate - want) <= 4 * est.se

    def test_strict_excludes_level(self):
        law = enumerate_interleavings(3, 3, "d_plus")
        level = Fraction(2, 3)
        want = float(interleaving_tail(law, level) - law[level])
        est = mc_two_sample_tail(3, 3, level, reps=100_000, seed=12, statistic="d_plus")
        assert abs(est.estimate - want) <= 4 * max(est.se, 1e-3)


class TestCalibration:
    fam = get_family("normal")

    def test_extreme_levels(self):
        one = null_calibration(self.fam, 30, 100, 1.0, seed=13, reps=2000, grid_size=20)
        zero = null_calibration(self.fam, 30, 100, 0.0, seed=13, reps=2000, grid_size=20)
        assert one.rate == 1.0 and zero.rate == 0.0
        assert one.pvalues.shape == (100,) and one.failures == 0

    def test_replicate_floor(self):
        with pytest.raises(InvalidParameterError, match="at least 100"):
            null_calibration(self.fam, 30, 99, 0.05)

    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            null_calibration(self.fam, 30, 100, 1.5)
        with pytest.raises(InvalidParameterError):
            null_calibration(self.fam, 30, 100, 0.05, method="exact")

    def test_deterministic(self):
        a = null_calibration(self.fam, 25, 100, 0.1, method="bootstrap", seed=14, reps=50)
        b = null_calibration(self.fam, 25, 100, 0.1, method="bootstrap", seed=14, reps=50)
        assert np.array_equal(a.pvalues, b.pvalues)


def test_oracles_do_not_use_exact_modules():
    tree = ast.parse(Path(oracle.__file__).read_text(encoding="utf-8"))
    imported = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.ImportFrom):
            imported.add(node.module or "")
            imported.update(a.name for a in node.names)
        elif isinstance(node, ast.Import):
            imported.update(a.name for a in node.names)
    assert not any("exact_one_sample" in m or "exact_two_sample" in m for m in imported)
