import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvtail.distributions import Alternative, RandomSource
from cvtail.empirics import (
    Sample,
    TestReport,
    ThresholdGrid,
    batch_cv_curves,
    batch_residual_cv,
    batch_statistic,
    compute_statistic,
    cv_curve,
    dyadic_thresholds,
    max_feasible_m,
    parse_statistic,
    residual_cv,
    statistic_cv,
    statistic_mw,
    statistic_su,
    statistic_T_general,
    statistic_T_m,
)
from cvtail.errors import DegenerateSampleError, InsufficientTailError, InvalidParameterError

positive = st.floats(1e-3, 1e3, allow_nan=False, allow_infinity=False)
samples = st.lists(positive, min_size=40, max_size=200, unique=True)


def exp_sample(n, seed=0):
    return Sample(Alternative("exp", 1.0).draw(n, RandomSource(seed)))


def brute_cv(values, t):
    # textbook evaluation from raw sums, independent of the library code path
    exc = [x - t for x in values if x > t]
    k = len(exc)
    mean = sum(exc) / k
    var = sum((e - mean) ** 2 for e in exc) / k
    return math.sqrt(var) / mean


class TestSample:
    def test_sorted_and_readonly(self):
        s = Sample([3.0, 1.0, 2.0])
        assert list(s.values) == [1.0, 2.0, 3.0]
        with pytest.raises(ValueError):
            s.values[0] = 5.0

    @pytest.mark.parametrize("bad", [[1.0, 0.0], [1.0, -2.0], [1.0, float("nan")], [float("inf")]])
    def test_rejects(self, bad):
        with pytest.raises(InvalidParameterError):
            Sample(bad)

    def test_order_stat(self):
        s = Sample([5.0, 1.0, 3.0])
        assert [s.order_stat(k) for k in range(4)] == [0.0, 1.0, 3.0, 5.0]
        with pytest.raises(IndexError):
            s.order_stat(4)

    def test_strict_exceedance(self):
        s = Sample([1.0, 2.0, 2.0, 3.0])
        assert list(s.exceedances(2.0)) == [3.0]
        assert s.tail_count(2.0) == 1

    def test_largest(self):
        s = Sample([4.0, 1.0, 3.0, 2.0])
        assert list(s.largest(2).values) == [3.0, 4.0]
        assert s.largest(None) is s
        assert s.largest(10) is s


class TestResidualCv:
    def test_constant(self):
        assert residual_cv(Sample([2.0, 2.0, 2.0]), 0.0) == 0.0

    def test_hand_values(self):
        s = Sample([1.0, 2.0, 3.0])
        assert residual_cv(s, 0.0) == pytest.approx(math.sqrt(2 / 3) / 2, abs=1e-15)
        assert round(residual_cv(s, 0.0), 5) == 0.40825
        assert residual_cv(s, 1.5) == pytest.approx(0.5, abs=1e-15)

    def test_insufficient(self):
        with pytest.raises(InsufficientTailError):
            residual_cv(Sample([1.0, 2.0, 3.0]), 2.0)

    @given(samples, st.integers(0, 30))
    def test_brute_force(self, vals, k):
        s = Sample(vals)
        t = s.order_stat(k)
        assert residual_cv(s, t) == pytest.approx(brute_cv(vals, t), rel=1e-10)

    @given(samples, st.integers(0, 30), st.sampled_from([1e-3, 1.0, 1e6]))
    def test_scale_invariance(self, vals, k, lam):
        s = Sample(vals)
        t = s.order_stat(k)
        assert residual_cv(s.scaled(lam), t * lam) == pytest.approx(residual_cv(s, t), rel=1e-12)


class TestCvCurve:
    def test_index_bookkeeping(self):
        c = cv_curve(Sample([1, 2, 3, 4, 5]), min_tail=3)
        assert list(c.k) == [0, 1, 2]
        assert list(c.threshold) == [0.0, 1.0, 2.0]
        assert list(c.tail_count) == [5, 4, 3]

    def test_first_entry_is_cv(self):
        s = exp_sample(5000, 1)
        assert cv_curve(s).cv[0] == pytest.approx(statistic_cv(s), rel=1e-12)

    @given(samples)
    @settings(max_examples=30)
    def test_matches_residual_cv(self, vals):
        s = Sample(vals)
        c = cv_curve(s, min_tail=5)
        ref = [residual_cv(s, t) for t in c.threshold]
        np.testing.assert_allclose(c.cv, ref, rtol=1e-9)
        assert np.all(np.diff(c.tail_count) == -1)

    def test_ties(self):
        s = Sample([1.0, 2.0, 2.0, 3.0, 4.0, 5.0])
        c = cv_curve(s, min_tail=3)
        # duplicate thresholds drop both tied values from the tail
        assert list(c.threshold) == [0.0, 1.0, 2.0, 2.0]
        assert list(c.tail_count) == [6, 5, 3, 3]
        np.testing.assert_allclose(c.cv, [residual_cv(s, t) for t in c.threshold], rtol=1e-12)

    def test_preconditions(self):
        with pytest.raises(InsufficientTailError):
            cv_curve(Sample([1.0, 2.0]), min_tail=3)
        with pytest.raises(InvalidParameterError):
            cv_curve(Sample([1.0, 2.0, 3.0]), min_tail=1)

    def test_rows_without_bands(self):
        row = next(cv_curve(Sample([1, 2, 3, 4]), 3).rows())
        assert row[4] is None and row[5] is None
        with pytest.raises(InvalidParameterError):
            cv_curve(Sample([1, 2, 3, 4]), 3).fraction_inside()


class TestDyadic:
    def test_n8_m2(self):
        s = Sample(np.arange(1.0, 9.0))
        g = dyadic_thresholds(s, 2, min_tail=2)
        assert g.thresholds == (0.0, s.order_stat(4), s.order_stat(6))
        assert g.tail_counts == (8, 4, 2)

    def test_equally_spaced_under_null(self):
        s = exp_sample(1_000_000, 2)
        g = dyadic_thresholds(s, 3)
        for k, t in enumerate(g.thresholds):
            assert abs(t - k * math.log(2)) < 0.02

    def test_m7_needs_smaller_min_tail(self):
        s = exp_sample(2000, 3)
        with pytest.raises(InsufficientTailError) as err:
            dyadic_thresholds(s, 7)
        assert err.value.max_feasible_m == 6
        assert "6" in str(err.value)
        g = dyadic_thresholds(s, 7, min_tail=15)
        assert g.tail_counts == tuple(2000 >> k for k in range(8))

    @pytest.mark.parametrize("n,tail,expected", [(2000, 20, 6), (100, 20, 2), (19, 20, -1), (40, 20, 1)])
    def test_max_feasible(self, n, tail, expected):
        assert max_feasible_m(n, tail) == expected

    def test_grid_validation(self):
        with pytest.raises(InvalidParameterError):
            ThresholdGrid((1.0, 0.5), (5, 4))
        with pytest.raises(InvalidParameterError):
            ThresholdGrid((0.0, 1.0), (4, 5))
        with pytest.raises(InsufficientTailError):
            ThresholdGrid((0.0,), (1,))


class TestStatistics:
    def test_T_general_hand(self):
        s = Sample([1.0, 2.0, 3.0])
        v = statistic_T_general(s, ThresholdGrid((0.0,), (3,)))
        assert v == pytest.approx(3 * (math.sqrt(2 / 3) / 2 - 1) ** 2, rel=1e-14)
        assert round(v, 4) == 1.0505

    def test_T_general_exact_null(self):
        # {1, 1, x} with x^2 - 8x - 2 = 0 has E[X^2] = 2 E[X]^2, i.e. cv(0) = 1
        s = Sample([1.0, 1.0, 4.0 + math.sqrt(18.0)])
        assert statistic_T_general(s, ThresholdGrid((0.0,), (3,))) == pytest.approx(0.0, abs=1e-24)

    @given(samples)
    def test_greenwood_identity(self, vals):
        s = Sample(vals)
        t0, cvs = statistic_T_m(s, 0)
        assert t0 == s.n * (statistic_cv(s) - 1.0) ** 2
        assert t0 == pytest.approx(statistic_T_general(s, dyadic_thresholds(s, 0)), rel=1e-12)
        assert len(cvs) == 1

    def test_T_m_weights_are_idealized(self):
        s = exp_sample(1000, 4)
        value, cvs = statistic_T_m(s, 3)
        assert len(cvs) == 4
        assert value == pytest.approx(1000 * sum(2.0**-k * (c - 1) ** 2 for k, c in enumerate(cvs)),
                                      rel=1e-14)

    def test_T_m_general_when_dyadic(self):
        s = exp_sample(1024, 5)
        value, _ = statistic_T_m(s, 3)
        assert value == pytest.approx(statistic_T_general(s, dyadic_thresholds(s, 3)), rel=1e-12)

    def test_cv_examples(self):
        assert statistic_cv(Sample([4.0] * 5)) == 0.0
        assert statistic_cv(Sample([1.0, 2.0, 3.0])) == pytest.approx(0.408248290463863, rel=1e-14)

    def test_mw_examples(self):
        assert statistic_mw(Sample([1, 2, 3, 4, 5])) == pytest.approx(5 / 3)
        assert statistic_mw(Sample([2.0] * 6)) == 1.0
        assert statistic_mw(Sample([1, 2, 3, 10])) == pytest.approx(10 / 2.5)

    def test_su_examples(self):
        assert statistic_su(Sample([1.0, 2.0, 3.0])) == pytest.approx(math.sqrt(2 / 3) / (2 / 3), rel=1e-14)
        assert round(statistic_su(Sample([1.0, 2.0, 3.0])), 4) == 1.2247
        assert statistic_su(Sample([1.5, 7.0])) == pytest.approx(1.0, rel=1e-15)
        with pytest.raises(DegenerateSampleError):
            statistic_su(Sample([3.0] * 4))

    def test_minimum_size(self):
        with pytest.raises(InvalidParameterError):
            statistic_mw(Sample([1.0]))

    @given(samples, st.sampled_from([1e-3, 1.0, 1e6]))
    def test_scale_invariance_all(self, vals, lam):
        s, z = Sample(vals), Sample(vals).scaled(lam)
        g, gz = dyadic_thresholds(s, 1), dyadic_thresholds(z, 1)
        pairs = [
            (statistic_cv(s), statistic_cv(z)),
            (statistic_mw(s), statistic_mw(z)),
            (statistic_su(s), statistic_su(z)),
            (statistic_T_m(s, 1)[0], statistic_T_m(z, 1)[0]),
            (statistic_T_general(s, g), statistic_T_general(z, gz)),
            (residual_cv(s, g.thresholds[1]), residual_cv(z, gz.thresholds[1])),
        ]
        for a, b in pairs:
            assert b == pytest.approx(a, rel=1e-12, abs=1e-12)


class TestNames:
    @pytest.mark.parametrize("name,m,expected", [
        ("cv", None, ("cv", None)), ("HW", None, ("mw", None)), ("su", 3, ("su", None)),
        ("t3", None, ("tm", 3)), ("tm", 2, ("tm", 2)), ("T0", 0, ("tm", 0)),
    ])
    def test_parse(self, name, m, expected):
        assert parse_statistic(name, m) == expected

    @pytest.mark.parametrize("name,m", [("tm", None), ("t2", 3), ("greenwood", None)])
    def test_parse_errors(self, name, m):
        with pytest.raises(InvalidParameterError):
            parse_statistic(name, m)

    def test_compute(self):
        s = exp_sample(200, 6)
        assert compute_statistic(s, "t2") == statistic_T_m(s, 2)[0]
        assert compute_statistic(s, "su") == statistic_su(s)


class TestBatch:
    @pytest.mark.parametrize("name", ["cv", "mw", "su", "t0", "t2"])
    @pytest.mark.parametrize("n", [101, 128])
    def test_matches_single(self, name, n):
        rows = np.sort(Alternative("gpd", 0.2).draw((25, n), RandomSource(8)), axis=1)
        got = batch_statistic(rows, name)
        ref = [compute_statistic(Sample(r), name) for r in rows]
        np.testing.assert_allclose(got, ref, rtol=1e-10)

    def test_residual_cv(self):
        rows = np.sort(Alternative("exp").draw((10, 64), RandomSource(9)), axis=1)
        got = batch_residual_cv(rows, [64, 32, 16])
        for r, g in zip(rows, got):
            s = Sample(r)
            ref = [residual_cv(s, s.order_stat(64 - c)) for c in (64, 32, 16)]
            np.testing.assert_allclose(g, ref, rtol=1e-12)

    def test_cv_curves(self):
        rows = np.sort(Alternative("abst", 3).draw((5, 80), RandomSource(10)), axis=1)
        got = batch_cv_curves(rows, 20)
        for r, g in zip(rows, got):
            np.testing.assert_allclose(g, cv_curve(Sample(r), 20).cv, rtol=1e-9)


class TestReportValidation:
    def test_p_pairs(self):
        with pytest.raises(InvalidParameterError):
            TestReport("t1", 1.0, 10, 1, p_value=0.5)
        with pytest.raises(InvalidParameterError):
            TestReport("t1", 1.0, 10, 1, p_value=1.5, p_method="monte-carlo")
        with pytest.raises(InvalidParameterError):
            TestReport("t1", 1.0, 10, 1, p_value=0.5, p_method="bootstrap")

    def test_cv_length(self):
        with pytest.raises(InvalidParameterError):
            TestReport("t1", 1.0, 10, 1, cvs=[1.0])
        d = TestReport("t1", 1.0, 10, 1, 0.2, "chi2-approx", [1.0, 1.1]).to_dict()
        assert d["cvs"] == [1.0, 1.1] and d["p_method"] == "chi2-approx"
