import numpy as np
import pytest

from src.services.markets import (
    AllocationError,
    AllocationRequest,
    allocate_without_replacement,
    draw_uniform,
    draw_uniform_int,
    split_counts,
    stochastic_round,
    stochastic_round_array,
)


class TestStochasticRound:

    def test_integer_input_consumes_no_draw(self):
        a = np.random.default_rng(5)
        b = np.random.default_rng(5)
        assert stochastic_round(3.0, a) == 3
        assert a.random() == b.random()

    def test_float_noise_around_integer_is_snapped(self, rng):
        assert stochastic_round(90 / 0.9, rng) == 100
        assert stochastic_round(3 * 0.1 * 10, rng) == 3

    def test_expected_value_preserved(self):
        rng = np.random.default_rng(2024)
        draws = np.array([stochastic_round(3.3, rng) for _ in range(100_000)])
        assert set(np.unique(draws)) == {3, 4}
        share_up = np.mean(draws == 4)
        assert abs(share_up - 0.3) < 3 * np.sqrt(0.3 * 0.7 / 100_000) + 1e-4

    @pytest.mark.parametrize("bad", [-0.5, float("nan"), float("inf")])
    def test_rejects_invalid(self, bad, rng):
        with pytest.raises(AllocationError):
            stochastic_round(bad, rng)

    def test_array_version_bounds(self, rng):
        values = np.array([0.0, 1.5, 2.25, 7.0])
        out = stochastic_round_array(values, rng)
        assert out.dtype == np.int64
        assert np.all(out >= np.floor(values))
        assert np.all(out <= np.ceil(values))
        assert out[0] == 0 and out[3] == 7

    def test_array_rejects_negative(self, rng):
        with pytest.raises(AllocationError):
            stochastic_round_array(np.array([1.0, -2.0]), rng)


class TestAllocation:

    def test_sums_exact_and_bounded(self, rng):
        weights = np.array([5, 0, 12, 3, 40])
        for total in (0, 1, 17, 59, 60):
            counts = allocate_without_replacement(AllocationRequest(weights, total), rng)
            assert counts.sum() == total
            assert np.all(counts >= 0)
            assert np.all(counts <= weights)

    def test_full_allocation_returns_weights(self, rng):
        weights = [3, 4, 5]
        counts = allocate_without_replacement(AllocationRequest(weights, 12), rng)
        assert counts.tolist() == weights

    def test_empty_request(self, rng):
        assert allocate_without_replacement(AllocationRequest([], 0), rng).size == 0

    def test_total_above_capacity_rejected(self, rng):
        with pytest.raises(AllocationError):
            allocate_without_replacement(AllocationRequest([1, 2], 4), rng)

    def test_negative_weight_rejected(self, rng):
        with pytest.raises(AllocationError):
            allocate_without_replacement(AllocationRequest([1, -2], 0), rng)

    def test_hypergeometric_mean_and_variance(self):
        rng = np.random.default_rng(99)
        trials = 100_000
        first = np.empty(trials)
        for i in range(trials):
            counts = allocate_without_replacement(AllocationRequest([100, 100], 100), rng)
            assert counts.sum() == 100
            first[i] = counts[0]
        # Hypergeometric(N=200, K=100, n=100)
        mean = 50.0
        var = 100 * 0.5 * 0.5 * (200 - 100) / (200 - 1)
        assert abs(first.mean() - mean) < 3 * np.sqrt(var / trials)
        assert abs(first.var() - var) < 3 * var * np.sqrt(2.0 / trials)

    def test_permutation_equivariance(self):
        weights = np.array([2, 7, 1, 10, 5])
        total, trials = 9, 40_000
        perm = np.array([3, 0, 4, 1, 2])
        rng = np.random.default_rng(17)
        plain = np.array([allocate_without_replacement(AllocationRequest(weights, total), rng)
                          for _ in range(trials)])
        permuted = np.empty_like(plain)
        for i in range(trials):
            permuted[i, perm] = allocate_without_replacement(AllocationRequest(weights[perm], total), rng)
        assert np.all(permuted.sum(axis=1) == total)

        w = weights.sum()
        share = weights / w
        mean = total * share
        var = total * share * (1 - share) * (w - total) / (w - 1)
        for counts in (plain, permuted):
            assert np.all(np.abs(counts.mean(axis=0) - mean) < 4 * np.sqrt(var / trials))
        # both orderings agree with each other bin by bin
        assert np.all(np.abs(plain.mean(axis=0) - permuted.mean(axis=0)) < 4 * np.sqrt(2 * var / trials))
        assert np.allclose(plain.var(axis=0), permuted.var(axis=0), rtol=0.05)


class TestDraws:

    def test_uniform_within_bounds(self, rng):
        draws = [draw_uniform(0.025, 0.075, rng) for _ in range(1000)]
        assert min(draws) >= 0.025 and max(draws) <= 0.075

    def test_uniform_constant_range(self, rng):
        assert draw_uniform(0.05, 0.05, rng) == 0.05

    def test_uniform_int_inclusive(self, rng):
        draws = {draw_uniform_int(1, 3, rng) for _ in range(500)}
        assert draws == {1, 2, 3}

    def test_uniform_int_frequencies(self):
        rng = np.random.default_rng(31)
        trials = 60_000
        draws = np.array([draw_uniform_int(1, 3, rng) for _ in range(trials)])
        tolerance = 4 * np.sqrt((1 / 3) * (2 / 3) / trials)
        for value in (1, 2, 3):
            assert abs(np.mean(draws == value) - 1 / 3) < tolerance

    def test_reversed_bounds_rejected(self, rng):
        with pytest.raises(AllocationError):
            draw_uniform(0.2, 0.1, rng)
        with pytest.raises(AllocationError):
            draw_uniform_int(3, 1, rng)

    def test_split_counts(self):
        chunks = split_counts(np.arange(6), [2, 0, 3])
        assert [c.tolist() for c in chunks] == [[0, 1], [], [2, 3, 4]]
