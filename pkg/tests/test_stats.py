import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vanet_twohop import stats
from vanet_twohop.stats import GaussianFit, N2Statistics, Pmf


def test_pmf_constant():
    pmf = stats.pmf_from_counts([2, 2, 2])
    assert pmf.support == (2,)
    assert pmf.masses == (1.0,)
    assert pmf.sample_size == 3


def test_pmf_two_values():
    pmf = stats.pmf_from_counts([0, 1])
    assert pmf.masses == (0.5, 0.5)
    assert pmf.mean == 0.5


def test_pmf_empty():
    with pytest.raises(ValueError):
        stats.pmf_from_counts([])


def test_pmf_rejects_bad_masses():
    with pytest.raises(ValueError):
        Pmf((0, 1), (0.5, 0.6), 2)
    with pytest.raises(ValueError):
        stats.pmf_from_counts([1, -1])


def test_pmf_poisson_mean():
    rng = np.random.default_rng(11)
    pmf = stats.pmf_from_counts(rng.poisson(5.0, 20_000))
    assert abs(pmf.mean - 5.0) < 3 * math.sqrt(5.0 / 20_000)


@given(st.lists(st.integers(0, 300), min_size=1, max_size=400))
def test_pmf_moments_match_raw(counts):
    pmf = stats.pmf_from_counts(counts)
    arr = np.array(counts, dtype=float)
    assert math.isclose(pmf.mean, arr.mean(), rel_tol=1e-10, abs_tol=1e-12)
    assert math.isclose(pmf.variance, arr.var(), rel_tol=1e-10, abs_tol=1e-10)
    assert abs(math.fsum(pmf.masses) - 1) <= 1e-12


def test_n2_statistics():
    s = N2Statistics.from_counts([1, 2, 3, 4])
    assert s.mean == 2.5
    assert s.variance == pytest.approx(5 / 3)
    assert s.std_error == pytest.approx(math.sqrt(5 / 12))
    assert s.z_score(2.5) == 0.0
    d = s.to_dict()
    assert d["runs"] == 4 and d["pmf"]["support"] == [1, 2, 3, 4]


class TestGaussianCdf:
    def test_center(self):
        assert stats.gaussian_cdf(0.0) == 0.5

    def test_quantile(self):
        assert stats.gaussian_cdf(1.959964) == pytest.approx(0.975, abs=1e-7)
        assert stats.gaussian_cdf(1.959964) == pytest.approx(0.5 * (1 + math.erf(1.959964 / math.sqrt(2))),
                                                             abs=1e-15)

    @given(st.floats(-30, 30))
    def test_symmetry(self, x):
        assert abs(stats.gaussian_cdf(-x) - (1 - stats.gaussian_cdf(x))) <= 1e-14

    def test_agrees_with_erf_identity(self):
        xs = np.linspace(-6, 6, 2001)
        ref = np.array([0.5 * (1 + math.erf(x / math.sqrt(2))) for x in xs])
        assert np.max(np.abs(stats.gaussian_cdf(xs) - ref)) <= 1e-13


class TestNormalApprox:
    def test_gaussian_sample(self):
        x = np.random.default_rng(3).standard_normal(10_000)
        res = stats.normal_approx_test(x, GaussianFit(0.0, 1.0))
        assert res.ks < 0.02
        assert res.sample_size == 10_000

    def test_constant_sample(self):
        with pytest.raises(ValueError):
            stats.normal_approx_test([4, 4, 4], GaussianFit(4.0, 1.0))

    def test_bad_fit(self):
        with pytest.raises(ValueError):
            GaussianFit(0.0, 0.0)

    def test_raw_ks_matches_scipy(self):
        from scipy import stats as sps
        x = np.random.default_rng(8).normal(2.0, 3.0, 500)
        res = stats.normal_approx_test(x, GaussianFit(2.0, 3.0))
        assert res.ks == pytest.approx(sps.kstest(x, "norm", args=(2.0, 3.0)).statistic, abs=1e-14)

    def test_continuity_correction_helps_for_lattice_data(self):
        rng = np.random.default_rng(5)
        counts = np.rint(rng.normal(30, 5, 20_000)).astype(int)
        res = stats.normal_approx_test(counts, GaussianFit(30, math.sqrt(25 + 1 / 12)))
        assert res.ks > 0.03
        assert res.passed

    def test_skewed_sample_rejected(self):
        counts = np.random.default_rng(1).poisson(2.0, 20_000)
        res = stats.normal_approx_test(counts, GaussianFit(2.0, math.sqrt(2.0)))
        assert not res.passed

    @given(st.floats(0.1, 20), st.floats(-50, 50))
    def test_affine_invariance(self, a, b):
        counts = np.random.default_rng(2).poisson(12.0, 400).astype(float)
        fit = GaussianFit(12.0, math.sqrt(12.0))
        base = stats.normal_approx_test(counts, fit).ks
        moved = stats.normal_approx_test(a * counts + b, GaussianFit(a * 12.0 + b, a * fit.std_dev)).ks
        assert moved == pytest.approx(base, abs=1e-12)

    @given(st.integers(-40, 40))
    def test_integer_shift_invariance_corrected(self, b):
        counts = np.random.default_rng(2).poisson(12.0, 400)
        fit = GaussianFit(12.0, math.sqrt(12.0))
        base = stats.normal_approx_test(counts, fit).ks_corrected
        moved = stats.normal_approx_test(counts + b, GaussianFit(12.0 + b, fit.std_dev)).ks_corrected
        assert moved == pytest.approx(base, abs=1e-12)

    def test_critical_value(self):
        assert stats.ks_critical_value(20_000, 0.05) == pytest.approx(1.3581 / math.sqrt(20_000), rel=2e-3)


class TestDispersion:
    def test_poisson(self):
        x = np.random.default_rng(21).poisson(3.0, 50_000)
        res = stats.poisson_dispersion_test(x)
        assert abs(res.dispersion - 1) < 0.05
        assert not res.rejects(0.01)

    def test_binomial_underdispersed(self):
        x = np.random.default_rng(22).binomial(10, 0.5, 50_000)
        res = stats.poisson_dispersion_test(x)
        assert res.dispersion < 0.6
        assert res.rejects(0.01)

    def test_zero_mean(self):
        with pytest.raises(ValueError):
            stats.poisson_dispersion_test([0, 0, 0])

    def test_fixed_mean_reference(self):
        x = np.random.default_rng(23).poisson(1.25, 50_000)
        assert not stats.poisson_dispersion_test(x, mean=1.25).rejects(0.01)
        assert stats.poisson_dispersion_test(x, mean=1.4).rejects(0.01)

    def test_bins_have_expected_at_least_five(self):
        edges = stats._poisson_bins(0.8, 200)
        from scipy import stats as sps
        cdf = sps.poisson(0.8).cdf(edges)
        probs = np.diff(np.concatenate([[0.0], cdf, [1.0]]))
        assert np.all(200 * probs >= 5)
