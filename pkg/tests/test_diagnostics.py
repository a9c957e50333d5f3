import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pabf.diagnostics import (
    TransitionCounter,
    l2_gradient_error,
    marginal_histograms,
    occupancy_histogram,
    realization_variance,
    transition_count,
)
from pabf.fields import Grid2, VectorField2

GRID = Grid2(0.0, 1.0, 8)


def field(values):
    return VectorField2(values, GRID)


class TestRealizationVariance:
    def test_identical_realizations_have_zero_variance(self):
        rng = np.random.default_rng(0)
        v = rng.standard_normal((8, 8, 2))
        per, total = realization_variance([field(v.copy()) for _ in range(5)])
        assert total == 0.0
        np.testing.assert_array_equal(per, 0.0)

    def test_two_values_single_bin(self):
        # one bin holding 0 and 2: (1/2)(0+4) - 1^2 = 1 for that component
        stack = np.zeros((2, 1, 1, 2))
        stack[1, 0, 0, 0] = 2.0
        per, total = realization_variance(stack)
        assert per[0] == pytest.approx(1.0)
        assert per[1] == 0.0
        assert total == pytest.approx(1.0)

    def test_matches_two_pass_reference(self):
        rng = np.random.default_rng(1)
        stack = rng.standard_normal((6, 8, 8, 2))
        per, total = realization_variance(stack)
        ref = np.zeros(2)
        for c in range(2):
            second = np.mean([np.mean(stack[k, :, :, c] ** 2) for k in range(6)], axis=0)
            # spec formula: spatial average of second moments minus spatial
            # average of squared across-realization means
            second = np.mean(np.mean(stack[:, :, :, c] ** 2, axis=0))
            first = np.mean(np.mean(stack[:, :, :, c], axis=0) ** 2)
            ref[c] = second - first
        np.testing.assert_allclose(per, ref, atol=1e-12)
        assert total == pytest.approx(ref.sum(), abs=1e-12)

    def test_requires_two_realizations(self):
        with pytest.raises(ValueError):
            realization_variance([field(np.zeros((8, 8, 2)))])

    def test_rejects_mismatched_grids(self):
        other = VectorField2(np.zeros((6, 6, 2)), Grid2(0.0, 1.0, 6))
        with pytest.raises(ValueError):
            realization_variance([field(np.zeros((8, 8, 2))), other])

    def test_nonnegative(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            stack = rng.standard_normal((3, 8, 8, 2))
            per, total = realization_variance(stack)
            assert total >= 0.0
            assert np.all(per >= 0.0)


class TestL2Error:
    def test_equal_fields_give_zero(self):
        v = np.random.default_rng(3).standard_normal((8, 8, 2))
        assert l2_gradient_error(field(v), field(v.copy())) == 0.0

    def test_zero_estimate_gives_one(self):
        v = np.random.default_rng(4).standard_normal((8, 8, 2))
        assert l2_gradient_error(field(np.zeros_like(v)), field(v)) == pytest.approx(1.0, abs=1e-12)

    def test_homogeneity(self):
        v = np.random.default_rng(5).standard_normal((8, 8, 2))
        assert l2_gradient_error(field(1.1 * v), field(v)) == pytest.approx(0.1, abs=1e-12)

    def test_mask_restricts_the_norm(self):
        v = np.ones((8, 8, 2))
        est = v.copy()
        est[0, 0] = 5.0
        mask = np.ones((8, 8), dtype=bool)
        mask[0, 0] = False
        assert l2_gradient_error(field(est), field(v), mask) == 0.0

    def test_empty_mask_raises(self):
        v = np.ones((8, 8, 2))
        with pytest.raises(ValueError):
            l2_gradient_error(field(v), field(v), np.zeros((8, 8), dtype=bool))


class TestMarginals:
    def test_single_occupied_bin_gives_indicators(self):
        counts = np.zeros((8, 8))
        counts[3, 5] = 7
        m1, m2 = marginal_histograms(counts)
        expected1 = np.zeros(8)
        expected1[3] = 1.0
        expected2 = np.zeros(8)
        expected2[5] = 1.0
        np.testing.assert_array_equal(m1, expected1)
        np.testing.assert_array_equal(m2, expected2)

    def test_uniform_counts_give_flat_marginals(self):
        m1, m2 = marginal_histograms(np.full((8, 8), 3.0))
        np.testing.assert_allclose(m1, 1.0 / 8)
        np.testing.assert_allclose(m2, 1.0 / 8)

    def test_normalization(self):
        rng = np.random.default_rng(6)
        counts = rng.integers(0, 10, size=(8, 8))
        counts[0, 0] += 1  # guarantee nonzero
        m1, m2 = marginal_histograms(counts)
        assert m1.sum() == pytest.approx(1.0, abs=1e-12)
        assert m2.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(m1 >= 0) and np.all(m2 >= 0)

    def test_zero_samples_raise(self):
        with pytest.raises(ValueError):
            marginal_histograms(np.zeros((8, 8)))

    def test_occupancy_histogram_counts_inside_only(self):
        z = np.array([[0.1, 0.1], [0.1, 0.1], [2.0, 0.5], [0.9, 0.9]])
        counts = occupancy_histogram(z, GRID)
        assert counts.sum() == 3
        assert counts[0, 0] == 2


class TestTransitions:
    LOW, HIGH = 2.12, 4.12

    def test_constant_series_has_no_transitions(self):
        assert transition_count(np.full(100, 1.12), self.LOW, self.HIGH) == 0

    def test_full_round_trip_counts_two(self):
        d1, w = 1.12, 2.0
        series = [d1, d1 + 2 * w, d1]
        assert transition_count(series, self.LOW, self.HIGH) == 2

    def test_chatter_between_thresholds_ignored(self):
        rng = np.random.default_rng(7)
        series = rng.uniform(self.LOW + 0.01, self.HIGH - 0.01, size=1000)
        assert transition_count(series, self.LOW, self.HIGH) == 0

    def test_requires_ordered_thresholds(self):
        with pytest.raises(ValueError):
            TransitionCounter(3.0, 2.0)

    def test_online_matches_batch(self):
        rng = np.random.default_rng(8)
        series = 3.12 + 2.5 * np.sin(np.linspace(0, 40, 2000)) + 0.3 * rng.standard_normal(2000)
        counter = TransitionCounter(self.LOW, self.HIGH)
        for v in series:
            counter.update(v)
        assert counter.count == transition_count(series, self.LOW, self.HIGH)
        assert counter.count > 0

    @given(st.lists(st.floats(0.0, 6.0), min_size=1, max_size=200))
    @settings(max_examples=60, deadline=None)
    def test_count_bounded_by_band_exits(self, series):
        # each transition needs the series to cross the full [low, high] band
        n = transition_count(series, self.LOW, self.HIGH)
        crossings = 0
        state = 0
        for v in series:
            if v < self.LOW:
                new = -1
            elif v > self.HIGH:
                new = 1
            else:
                continue
            if state != 0 and new != state:
                crossings += 1
            state = new
        assert n == crossings
