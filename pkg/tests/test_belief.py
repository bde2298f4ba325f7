import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from sbes.belief import (
    BeliefCurve,
    BeliefEnsemble,
    ParametricFamilySpec,
    PROB_EPS,
    comparison_probabilities,
    g_bar,
    g_mixture,
    g_single,
    is_unimodal,
    load_tabulated,
    update_weights,
)


def const_curve(label, value_at, argmax):
    """Curve given as a lookup on a handful of x values (piecewise linear)."""
    xs = np.array(sorted(value_at))
    ys = np.array([value_at[x] for x in xs])
    return BeliefCurve(label, lambda x: np.interp(x, xs, ys), argmax)


def two_point_ensemble(f1, f2, sigma=1.0, weights=(0.5, 0.5)):
    c1 = const_curve("a", {0.0: f1[0], 1.0: f1[1], 2.0: f1[2]}, 0.5)
    c2 = const_curve("b", {0.0: f2[0], 1.0: f2[1], 2.0: f2[2]}, 1.5)
    return BeliefEnsemble(
        [c1, c2], np.log(np.asarray(weights, dtype=float)), sigma, (0.0, 2.0)
    )


@pytest.fixture
def gauss_ens():
    spec = ParametricFamilySpec("gaussian-pdf", [(mu, 1.0) for mu in np.linspace(2, 8, 7)])
    return spec.ensemble((0.0, 10.0), 0.05)


class TestUpdateWeights:
    def test_likelihood_ratio_example(self):
        ens = two_point_ensemble((0, 0, 0), (2, 2, 2), sigma=1.0)
        new = update_weights(ens, 1.0, 0.0)
        npt.assert_allclose(new.weights[0], 1.0 / (1.0 + math.exp(-2.0)), rtol=1e-12)
        npt.assert_allclose(new.weights[0], 0.8808, atol=5e-5)

    def test_equal_values_leave_weights(self):
        ens = two_point_ensemble((1, 3, 0), (1, 5, 0), weights=(0.3, 0.7))
        new = update_weights(ens, 0.0, 17.0)
        npt.assert_allclose(new.weights, [0.3, 0.7], rtol=1e-12)

    def test_consistent_data_drives_weight_to_one(self):
        ens = two_point_ensemble((0, 1, 0), (0, 0.5, 0), sigma=0.2, weights=(0.5, 0.5))
        p = [ens.weights[0]]
        for _ in range(8):
            ens = update_weights(ens, 1.0, 1.0)
            p.append(ens.weights[0])
        assert np.all(np.diff(p) > 0)
        assert p[-1] > 1 - 1e-9

    def test_underflow_survives(self):
        ens = two_point_ensemble((0, 0, 0), (1, 1, 1), sigma=1e-6)
        new = update_weights(ens, 1.0, 1e6)
        npt.assert_allclose(new.weights.sum(), 1.0)
        assert np.all(np.isfinite(new.log_weights))

    def test_out_of_domain_rejected(self, gauss_ens):
        with pytest.raises(ValueError):
            update_weights(gauss_ens, 11.0, 0.1)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.floats(0, 10), st.floats(-1, 1)), min_size=1, max_size=25))
    def test_simplex_preserved(self, obs):
        spec = ParametricFamilySpec("gaussian-pdf", [(mu, 1.0) for mu in (2, 4, 6, 8)])
        ens = spec.ensemble((0.0, 10.0), 0.05)
        for x, y in obs:
            ens = update_weights(ens, x, y)
        assert abs(ens.weights.sum() - 1.0) <= 1e-9
        assert np.all(ens.weights >= 0)


class TestGSingle:
    def test_tie_is_half(self):
        c = const_curve("c", {0.0: 1.0, 2.0: 1.0}, 1.0)
        assert g_single(c, 0.0, 2.0, 0.3) == 0.5

    def test_sqrt2_sigma_gap(self):
        sigma = 0.7
        c = const_curve("c", {0.0: math.sqrt(2) * sigma, 2.0: 0.0}, 0.0)
        npt.assert_allclose(g_single(c, 0.0, 2.0, sigma), 0.841345, atol=5e-7)
        npt.assert_allclose(g_single(c, 0.0, 2.0, sigma), norm.cdf(1.0), rtol=1e-12)

    def test_noiseless_is_certain(self):
        c = const_curve("c", {0.0: 1.0, 2.0: 0.0}, 0.0)
        assert g_single(c, 0.0, 2.0, 0.0) == 1.0
        assert g_single(c, 2.0, 0.0, 0.0) == 1.0

    def test_sigma_limits(self):
        c = const_curve("c", {0.0: 1.0, 2.0: 0.0}, 0.0)
        assert g_single(c, 0.0, 2.0, 1e8) == pytest.approx(0.5, abs=1e-8)
        assert g_single(c, 0.0, 2.0, 1e-8) == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 5), st.floats(0, 5), st.floats(0.01, 3))
    def test_bounds_and_monotone(self, d1, d2, sigma):
        lo, hi = sorted((d1, d2))
        c_lo = const_curve("a", {0.0: lo, 1.0: 0.0}, 0.0)
        c_hi = const_curve("b", {0.0: hi, 1.0: 0.0}, 0.0)
        g_lo, g_hi = g_single(c_lo, 0.0, 1.0, sigma), g_single(c_hi, 0.0, 1.0, sigma)
        assert 0.5 <= g_lo <= g_hi <= 1.0


class TestMixture:
    def test_convex_combination(self):
        sigma = 1.0
        d1 = math.sqrt(2) * norm.ppf(0.6)
        d2 = math.sqrt(2) * norm.ppf(0.8)
        ens = two_point_ensemble((d1, 0, 0), (d2, 0, 0), sigma)
        npt.assert_allclose(g_mixture(ens, 0.0, 1.0), 0.7, rtol=1e-12)

    def test_identical_curves_collapse(self):
        ens = two_point_ensemble((1.0, 0.2, 0), (1.0, 0.2, 0), 0.5, (0.2, 0.8))
        npt.assert_allclose(g_mixture(ens, 0.0, 1.0), g_single(ens.curves[0], 0.0, 1.0, 0.5))

    def test_symmetry_exact(self, gauss_ens):
        rng = np.random.default_rng(3)
        for x, y in rng.uniform(0, 10, size=(50, 2)):
            assert g_mixture(gauss_ens, x, y) == g_mixture(gauss_ens, y, x)

    def test_clamped(self):
        ens = two_point_ensemble((100, 0, 0), (100, 0, 0), 1e-3)
        assert g_mixture(ens, 0.0, 1.0) == 1 - PROB_EPS


class TestGBar:
    def test_empty_interior_is_half(self, gauss_ens):
        assert g_bar(gauss_ens, 0.0, 1.0) == 0.5

    def test_flat_interior_curve(self):
        ens = two_point_ensemble((0.0, 1.0, 0.0), (0.0, 0.0, 0.0), 0.3)
        assert g_bar(ens, 0.0, 2.0) == 0.5

    def test_restricted_weighted_average(self):
        sigma = 1.0
        a = math.sqrt(2) * norm.ppf(0.9)
        b = math.sqrt(2) * norm.ppf(0.3)
        c1 = const_curve("a", {0.0: a, 1.0: 5.0, 2.0: 0.0}, 1.0)
        c2 = const_curve("b", {0.0: b, 1.0: 5.0, 2.0: 0.0}, 1.2)
        c3 = const_curve("c", {0.0: 0.0, 2.0: 9.0, 3.0: 0.0}, 2.5)
        ens = BeliefEnsemble([c1, c2, c3], np.log([0.1, 0.3, 0.6]), sigma, (0.0, 3.0))
        npt.assert_allclose(g_bar(ens, 0.0, 2.0), 0.45, rtol=1e-12)

    def test_requires_order(self, gauss_ens):
        with pytest.raises(ValueError):
            g_bar(gauss_ens, 5.0, 5.0)
        with pytest.raises(ValueError):
            g_bar(gauss_ens, 6.0, 5.0)

    def test_vectorized_matches_scalar(self, gauss_ens):
        xs = np.array([0.5, 3.3, 7.0])
        ys = np.array([1.0, 4.1, 9.2, 6.5])
        g, gb = comparison_probabilities(gauss_ens, xs, ys)
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                npt.assert_allclose(g[i, j], g_mixture(gauss_ens, x, y), rtol=1e-13)
                npt.assert_allclose(gb[i, j], g_bar(gauss_ens, min(x, y), max(x, y)), rtol=1e-13)


class TestEnsemble:
    def test_needs_two_curves(self):
        c = const_curve("c", {0.0: 0.0, 1.0: 1.0}, 1.0)
        with pytest.raises(ValueError):
            BeliefEnsemble.uniform([c], 1.0, (0.0, 1.0))

    def test_distinct_optima_enforced(self):
        spec = ParametricFamilySpec("gaussian-pdf", [(5.0, 1.0), (5.0, 2.0)])
        with pytest.raises(ValueError):
            spec.ensemble((0.0, 10.0), 0.1)

    def test_scale_grid_expands(self):
        spec = ParametricFamilySpec("gamma-pdf", [(9.0, 1.0), (6.0, 1.0)], [0.5, 1.0, 2.0])
        ens = spec.ensemble((0.0, 20.0), 0.01)
        assert spec.size == ens.K == 6
        npt.assert_allclose(ens.weights, np.full(6, 1 / 6))

    def test_argmax_refined(self):
        spec = ParametricFamilySpec("gamma-pdf", [(9.0, 1.0)] + [(5.0, 1.0)])
        ens = spec.ensemble((0.0, 20.0), 0.01)
        npt.assert_allclose(ens.optima, [8.0, 4.0], atol=1e-6)

    def test_beta_mode(self):
        spec = ParametricFamilySpec("beta-pdf", [(3.0, 18.0), (2.0, 5.0)])
        ens = spec.ensemble((0.0, 1.0), 0.01)
        npt.assert_allclose(ens.optima, [2 / 19, 0.2], atol=1e-7)

    def test_non_unimodal_rejected(self):
        fn = lambda x: np.cos(3 * np.asarray(x))  # noqa: E731
        with pytest.raises(ValueError):
            BeliefCurve.from_function("wavy", fn, (0.0, 6.0))

    def test_unimodal_check(self):
        x = np.linspace(-1, 1, 101)
        assert is_unimodal(-(x**2))
        assert is_unimodal(x)
        assert not is_unimodal(x**2)

    def test_roundtrip_dict(self, tmp_path):
        spec = ParametricFamilySpec("quadratic", [(1.0, 2.0, 3.0), (2.0, 2.0, 3.0)], [1.0, 2.0])
        path = tmp_path / "family.json"
        path.write_text(__import__("json").dumps(spec.to_dict()))
        assert ParametricFamilySpec.load(path) == spec

    def test_tabulated_csv(self, tmp_path):
        path = tmp_path / "curve.csv"
        path.write_text("x,f\n0,0\n1,2\n3,1\n4,0\n")
        xs, ys = load_tabulated(path)
        npt.assert_array_equal(xs, [0, 1, 3, 4])
        spec = ParametricFamilySpec("tabulated", [str(path), (xs + 0.0, np.array([0, 1, 1.5, 2.0]))])
        ens = spec.ensemble((0.0, 4.0), 0.1)
        npt.assert_allclose(ens.optima, [1.0, 4.0], atol=1e-6)
        npt.assert_allclose(ens.values([2.0])[0], [1.5])

    def test_tabulated_rejects_unsorted(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,0\n2,1\n1,0\n")
        with pytest.raises(ValueError):
            load_tabulated(path)


def test_posterior_consistency_in_model():
    """Mean weight on the truth does not drop as observations accumulate."""
    spec = ParametricFamilySpec("gaussian-pdf", [(mu, 1.0) for mu in np.linspace(2, 8, 9)])
    sigma = 0.1
    ens0 = spec.ensemble((0.0, 10.0), sigma)
    truth = 4
    rng = np.random.default_rng(11)
    checkpoints = {5: [], 15: [], 30: []}
    for _ in range(200):
        ens = ens0
        xs = rng.uniform(0, 10, size=30)
        for n, x in enumerate(xs, start=1):
            y = float(ens0.curves[truth].evaluate(x)) + sigma * rng.standard_normal()
            ens = update_weights(ens, x, y)
            if n in checkpoints:
                checkpoints[n].append(ens.weights[truth])
    means = [np.mean(checkpoints[n]) for n in (5, 15, 30)]
    assert means[1] >= means[0] - 0.02
    assert means[2] >= means[1] - 0.02
