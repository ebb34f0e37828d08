import math

import numpy as np
import pytest
import scipy.stats as st

from storelab.special import (
    chi2_cdf,
    chi2_quantile,
    normal_cdf,
    normal_quantile,
    t_cdf,
    t_quantile,
)

ROUND_TRIP_DFS = (1, 2, 5, 30, 1000)
ROUND_TRIP_PS = [round(p, 2) for p in np.arange(0.01, 1.0, 0.01)]


class TestAnchors:
    def test_t_is_zero_at_the_median(self):
        for df in (1, 3, 10, 500):
            assert t_quantile(0.5, df) == 0.0

    def test_t_table_value(self):
        assert t_quantile(0.975, 10) == pytest.approx(2.2281, abs=1e-3)

    def test_t_converges_to_normal(self):
        assert t_quantile(0.975, 10**6) == pytest.approx(1.9600, abs=1e-3)

    def test_chi2_table_value(self):
        assert chi2_quantile(0.975, 10) == pytest.approx(20.483, abs=1e-2)

    def test_chi2_closed_form_df2(self):
        # CDF is 1 - exp(-x/2), so the median is 2 ln 2
        assert chi2_quantile(0.5, 2) == pytest.approx(2.0 * math.log(2.0), abs=1e-6)

    def test_chi2_vanishes_at_tiny_probability(self):
        assert chi2_quantile(1e-10, 1) < 1e-8


class TestRoundTrip:
    @pytest.mark.parametrize("df", ROUND_TRIP_DFS)
    def test_t_round_trip(self, df):
        for p in ROUND_TRIP_PS:
            assert abs(t_cdf(t_quantile(p, df), df) - p) <= 1e-7

    @pytest.mark.parametrize("df", ROUND_TRIP_DFS)
    def test_chi2_round_trip(self, df):
        for p in ROUND_TRIP_PS:
            assert abs(chi2_cdf(chi2_quantile(p, df), df) - p) <= 1e-7


class TestAgainstReference:
    def test_t_quantile_matches_scipy(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            p = float(rng.uniform(0.001, 0.999))
            df = int(rng.integers(1, 2000))
            assert t_quantile(p, df) == pytest.approx(st.t.ppf(p, df), rel=1e-9, abs=1e-9)

    def test_chi2_quantile_matches_scipy(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            p = float(rng.uniform(0.001, 0.999))
            df = int(rng.integers(1, 2000))
            assert chi2_quantile(p, df) == pytest.approx(st.chi2.ppf(p, df), rel=1e-9)

    def test_normal_quantile_matches_scipy(self):
        for p in (1e-12, 1e-6, 0.01, 0.3, 0.5, 0.77, 0.99, 1 - 1e-9):
            assert normal_quantile(p) == pytest.approx(st.norm.ppf(p), rel=1e-12, abs=1e-12)

    def test_cdfs_match_scipy(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            x = float(rng.uniform(-8, 8))
            df = int(rng.integers(1, 500))
            assert t_cdf(x, df) == pytest.approx(st.t.cdf(x, df), abs=1e-12)
            assert chi2_cdf(abs(x), df) == pytest.approx(st.chi2.cdf(abs(x), df), abs=1e-12)
        assert normal_cdf(1.0) == pytest.approx(st.norm.cdf(1.0), abs=1e-15)


class TestShape:
    def test_t_symmetry(self):
        for df in (1, 4, 50):
            for p in (0.6, 0.9, 0.999):
                assert t_quantile(p, df) == pytest.approx(-t_quantile(1.0 - p, df), rel=1e-12)

    def test_monotone_in_p(self):
        grid = np.linspace(0.01, 0.99, 25)
        tq = [t_quantile(float(p), 7) for p in grid]
        cq = [chi2_quantile(float(p), 7) for p in grid]
        assert np.all(np.diff(tq) > 0)
        assert np.all(np.diff(cq) > 0)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            t_quantile(0.0, 5)
        with pytest.raises(ValueError):
            t_quantile(0.5, 0)
        with pytest.raises(ValueError):
            chi2_quantile(1.0, 5)
        with pytest.raises(ValueError):
            chi2_quantile(0.5, 0)
        with pytest.raises(ValueError):
            normal_quantile(1.0)
        with pytest.raises(ValueError):
            chi2_cdf(1.0, 0)
