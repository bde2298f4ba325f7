import json
import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import chisquare

from sbes.posterior import (
    ComparisonOutcome,
    DegenerateUpdateError,
    PiecewiseDensity,
    PosteriorInvariantError,
)


def quad_entropy_bits(p: PiecewiseDensity) -> float:
    """Differential entropy by numerical integration, interval by interval."""
    total = 0.0
    for lo, hi, d in zip(p.edges[:-1], p.edges[1:], p.densities):
        if d > 0:
            val, _ = integrate.quad(lambda x: -d * math.log2(d), lo, hi)
            total += val
    return total


@pytest.fixture
def uniform01():
    return PiecewiseDensity.uniform(0.0, 1.0)


@pytest.fixture
def example_y1(uniform01):
    return uniform01.update(ComparisonOutcome(1, 0.25, 0.75), 0.8, 0.6)


@pytest.fixture
def example_y0(uniform01):
    return uniform01.update(ComparisonOutcome(0, 0.25, 0.75), 0.8, 0.6)


@st.composite
def densities(draw, max_pieces=8):
    n = draw(st.integers(1, max_pieces))
    cuts = sorted(draw(st.lists(st.floats(0.01, 0.99), min_size=n - 1, max_size=n - 1, unique=True)))
    edges = np.array([0.0, *cuts, 1.0])
    if np.any(np.diff(edges) < 1e-6):
        edges = np.linspace(0.0, 1.0, n + 1)
    w = np.array(draw(st.lists(st.floats(0.01, 10.0), min_size=n, max_size=n)))
    dens = w / np.sum(w * np.diff(edges))
    return PiecewiseDensity(edges, dens)


class TestCdf:
    def test_uniform(self, uniform01):
        assert uniform01.cdf(0.25) == 0.25

    def test_endpoints(self):
        p = PiecewiseDensity([0.0, 0.5, 1.0], [0.4, 1.6])
        assert p.cdf(0.0) == 0.0
        assert abs(p.cdf(1.0) - 1.0) <= 1e-12

    def test_two_piece(self):
        p = PiecewiseDensity([0.0, 0.5, 1.0], [0.4, 1.6])
        npt.assert_allclose(p.cdf(0.75), 0.6, rtol=1e-14)

    def test_out_of_domain(self, uniform01):
        with pytest.raises(ValueError):
            uniform01.cdf(1.5)

    @settings(max_examples=50, deadline=None)
    @given(densities())
    def test_monotone(self, p):
        c = p.cdf(np.linspace(0, 1, 257))
        assert np.all(np.diff(c) >= 0)

    @settings(max_examples=50, deadline=None)
    @given(densities())
    def test_ppf_inverts_cdf(self, p):
        u = np.linspace(0.0, 1.0, 101)
        npt.assert_allclose(p.cdf(p.ppf(u)), u, atol=1e-12)


class TestUpdate:
    def test_y1_example(self, example_y1):
        npt.assert_allclose(example_y1.densities, [0.2 / 0.45, 0.4 / 0.45, 0.8 / 0.45], rtol=1e-13)
        npt.assert_allclose(example_y1.densities, [0.4444444, 0.8888889, 1.7777778], atol=1e-7)
        npt.assert_allclose(example_y1.breakpoints, [0.25, 0.75])

    def test_y0_example(self, example_y0):
        npt.assert_allclose(example_y0.densities, [0.8 / 0.55, 0.6 / 0.55, 0.2 / 0.55], rtol=1e-13)
        npt.assert_allclose(example_y0.densities, [1.4545455, 1.0909091, 0.3636364], atol=1e-7)

    def test_uninformative(self, uniform01):
        q = uniform01.update(ComparisonOutcome(1, 0.2, 0.9), 0.5, 0.5)
        npt.assert_allclose(q.pdf(np.linspace(0, 1, 50)), 1.0, rtol=1e-14)

    def test_merge_within_delta(self, example_y1):
        q = example_y1.update(ComparisonOutcome(0, 0.25 + 1e-12, 0.5), 0.7, 0.6)
        npt.assert_allclose(q.breakpoints, [0.25, 0.5, 0.75])

    def test_rejects_bad_probabilities(self, uniform01):
        with pytest.raises(ValueError):
            uniform01.update(ComparisonOutcome(1, 0.2, 0.4), 1.0, 0.5)

    def test_degenerate_normalizer(self):
        p = PiecewiseDensity([0.0, 1.0], [1e-305])
        with pytest.raises(DegenerateUpdateError):
            p.reweight(0.25, 0.75, 1, 0.8, 0.6)

    def test_outcome_orientation(self):
        assert ComparisonOutcome.from_observations(0.7, 1.0, 0.2, 3.0).y_hat == 0
        assert ComparisonOutcome.from_observations(0.2, 1.0, 0.7, 1.0).y_hat == 1
        with pytest.raises(ValueError):
            ComparisonOutcome(1, 0.5, 0.5)

    @settings(max_examples=80, deadline=None)
    @given(densities(), st.floats(0.01, 0.49), st.floats(0.51, 0.99),
           st.floats(0.5, 0.999), st.floats(0.001, 0.999), st.integers(0, 1))
    def test_conservation(self, p, x_l, x_r, g, gb, y):
        q = p.update(ComparisonOutcome(y, x_l, x_r), g, gb)
        assert abs(q.total_mass - 1.0) <= 1e-9
        assert np.all(q.densities >= 0)

    @settings(max_examples=80, deadline=None)
    @given(densities(), st.floats(0.01, 0.49), st.floats(0.51, 0.99),
           st.floats(0.5, 0.999), st.floats(0.001, 0.999))
    def test_normalizers_sum_to_one(self, p, x_l, x_r, g, gb):
        left, mid = p.region_masses(x_l, x_r)
        right = 1.0 - left - mid
        u1 = (1 - g) * left + (1 - gb) * mid + g * right
        u0 = g * left + gb * mid + (1 - g) * right
        assert abs(u1 + u0 - 1.0) <= 1e-12

    @settings(max_examples=80, deadline=None)
    @given(densities(), st.floats(0.01, 0.49), st.floats(0.51, 0.99),
           st.floats(0.5, 0.999), st.floats(0.001, 0.999))
    def test_expected_entropy_not_above_prior(self, p, x_l, x_r, g, gb):
        left, mid = p.region_masses(x_l, x_r)
        u1 = (1 - g) * left + (1 - gb) * mid + g * (1 - left - mid)
        h1 = p.update(ComparisonOutcome(1, x_l, x_r), g, gb).entropy_bits()
        h0 = p.update(ComparisonOutcome(0, x_l, x_r), g, gb).entropy_bits()
        assert u1 * h1 + (1 - u1) * h0 <= p.entropy_bits() + 1e-9

    @settings(max_examples=50, deadline=None)
    @given(densities(), st.floats(0.02, 0.98), st.floats(0.5, 0.99), st.floats(0.01, 0.99))
    def test_commutes_with_refinement(self, p, split, g, gb):
        refined, _ = p.refine(split)
        out = ComparisonOutcome(1, 0.3, 0.7)
        a, b = p.update(out, g, gb), refined.update(out, g, gb)
        xs = np.linspace(0, 1, 997)
        npt.assert_allclose(a.pdf(xs), b.pdf(xs), atol=1e-12, rtol=0)

    def test_check_flags_bad_mass(self):
        with pytest.raises(PosteriorInvariantError):
            PiecewiseDensity([0.0, 1.0], [0.5]).check()


class TestEntropy:
    def test_unit_uniform(self, uniform01):
        assert uniform01.entropy_bits() == 0.0

    def test_width_four(self):
        assert PiecewiseDensity.uniform(0, 4).entropy_bits() == 2.0

    def test_y1_example(self, example_y1):
        # closed form reproduced by numerical integration
        npt.assert_allclose(example_y1.entropy_bits(), quad_entropy_bits(example_y1), rtol=1e-12)
        npt.assert_allclose(example_y1.entropy_bits(), -0.16341, atol=5e-6)

    def test_y0_example(self, example_y0):
        npt.assert_allclose(example_y0.entropy_bits(), quad_entropy_bits(example_y0), rtol=1e-12)
        npt.assert_allclose(example_y0.entropy_bits(), -0.13237, atol=5e-6)

    def test_discrete_equals_shannon(self):
        pmf = np.array([0.1, 0.2, 0.3, 0.4])
        p = PiecewiseDensity.discrete(pmf)
        npt.assert_allclose(p.entropy_bits(), -np.sum(pmf * np.log2(pmf)), rtol=1e-14)

    def test_zero_density_piece(self):
        p = PiecewiseDensity([0.0, 0.5, 1.0], [2.0, 0.0])
        assert p.entropy_bits() == -1.0


class TestKl:
    def test_uniform_zero(self):
        assert PiecewiseDensity.uniform(0, 4).kl_to_uniform() == 0.0

    def test_minus_one_bit(self):
        p = PiecewiseDensity([0.0, 0.5, 1.0], [2.0, 0.0])
        assert p.kl_to_uniform() == 1.0

    @settings(max_examples=50, deadline=None)
    @given(densities())
    def test_nonnegative(self, p):
        assert p.kl_to_uniform() >= -1e-12


class TestSample:
    def test_midpoint(self):
        p = PiecewiseDensity.uniform(2.0, 6.0)
        assert p.ppf(0.5) == 4.0

    def test_support(self):
        p = PiecewiseDensity([0.0, 0.3, 0.6, 1.0], [0.0, 1 / 0.3, 0.0])
        xs = p.sample(200, np.random.default_rng(0))
        assert np.all((xs >= 0.3) & (xs <= 0.6))

    def test_chi_square(self):
        p = PiecewiseDensity([0.0, 0.2, 0.5, 1.0], [0.5, 2.0, 0.6])
        rng = np.random.default_rng(5)
        xs = p.ppf(rng.random(100_000))
        edges = np.linspace(0, 1, 21)
        observed, _ = np.histogram(xs, edges)
        expected = np.diff(p.cdf(edges)) * xs.size
        assert chisquare(observed, expected).pvalue > 0.01

    def test_dedup_against_history(self):
        p = PiecewiseDensity([0.0, 0.5, 0.5 + 1e-12, 1.0], [0.0, 1e12, 0.0])
        xs = p.sample(3, np.random.default_rng(1), exclude=[0.5])
        spacing = np.diff(np.sort(np.append(xs, 0.5)))
        assert np.all(spacing >= p.delta - 1e-18)

    def test_count_validated(self, uniform01):
        with pytest.raises(ValueError):
            uniform01.sample(0, np.random.default_rng(0))


class TestRecommend:
    def test_uniform(self):
        assert PiecewiseDensity.uniform(2.0, 6.0).recommend() == 4.0

    def test_y1_example(self, example_y1):
        assert example_y1.recommend() == 0.875

    def test_tie_goes_to_mass(self):
        p = PiecewiseDensity([0.0, 0.3, 0.4, 1.0], [1.0, 0.0, 1.0])
        assert p.recommend() == 0.7

    def test_full_tie_goes_left(self):
        p = PiecewiseDensity([0.0, 0.25, 0.5, 0.75, 1.0], [2.0, 0.0, 2.0, 0.0])
        assert p.recommend() == 0.125

    def test_json_roundtrip(self, example_y1):
        d = json.loads(example_y1.to_json())
        assert set(d) == {"domain", "breakpoints", "densities"}
        back = PiecewiseDensity.from_dict(d)
        npt.assert_array_equal(back.edges, example_y1.edges)
        npt.assert_array_equal(back.densities, example_y1.densities)
