import itertools
import math

import pytest

from shapley_estimation.constants import AUGMENTED, ORIGINAL
from shapley_estimation.estimators import augment_with_dummy
from shapley_estimation.exact import (
    exact_pair_difference,
    exact_shapley,
    exact_shapley_by_permutations,
    exact_statistic_expectation,
    exact_statistic_moments,
)
from shapley_estimation.games import make_additive_game, make_threshold_game
from shapley_estimation.model import InvalidParameter, SizeLimitExceeded
from shapley_estimation.sampling import build_distribution, q_tot

from .mocks import CountingUtility


class TestExactShapley:
    def test_glove(self, glove_game):
        assert exact_shapley(glove_game).values == pytest.approx([1 / 6, 1 / 6, 2 / 3], abs=1e-12)

    def test_unanimity_dummy_gets_nothing(self, unanimity_game):
        assert exact_shapley(unanimity_game).values == pytest.approx([0.5, 0.5, 0.0], abs=1e-12)

    def test_agrees_with_permutation_enumeration(self, small_games):
        """
        GIVEN: One small game of every family
        WHEN:  Shapley values are computed by subset sums and by enumerating every ordering
        THEN:  The two agree to 1e-12
        """
        for game in small_games.values():
            by_subsets = exact_shapley(game).values
            by_orderings = exact_shapley_by_permutations(game).values
            assert by_subsets == pytest.approx(by_orderings, abs=1e-12)

    def test_single_player_gets_the_net_total(self):
        game = make_additive_game([0.4])
        assert exact_shapley(game).values == pytest.approx([0.4])
        assert exact_shapley_by_permutations(game).values == pytest.approx([0.4])

    def test_each_coalition_evaluated_once(self, cache):
        counting = CountingUtility(make_threshold_game(4, 2))
        exact_shapley(counting.spec, cache)
        assert cache.misses == 16
        assert counting.total_calls == 16

        exact_shapley(counting.spec, cache)
        assert counting.total_calls == 16
        assert cache.hits == 16

    def test_permutation_enumeration_size_limit(self):
        with pytest.raises(SizeLimitExceeded):
            exact_shapley_by_permutations(make_threshold_game(10, 5))

    def test_subset_enumeration_size_limit(self, config_override):
        config_override["SHAPLEY_EXACT_MAX_PLAYERS"] = "4"
        with pytest.raises(SizeLimitExceeded):
            exact_shapley(make_threshold_game(5, 2))


class TestExactPairDifference:
    def test_equals_difference_of_shapley_values(self, small_games):
        for game in small_games.values():
            phi = exact_shapley(game).values
            for i, j in itertools.permutations(range(game.n_players), 2):
                assert exact_pair_difference(game, i, j) == pytest.approx(phi[i] - phi[j], abs=1e-12)

    def test_glove(self, glove_game):
        assert exact_pair_difference(glove_game, 2, 0) == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("i,j", [(1, 1), (0, 3), (-1, 0)])
    def test_rejects_bad_pairs(self, glove_game, i, j):
        with pytest.raises(InvalidParameter):
            exact_pair_difference(glove_game, i, j)


class TestStatisticExpectation:
    def test_original_is_unbiased_for_differences(self, small_games):
        """
        GIVEN: Small games and the original size distribution
        WHEN:  E[(beta_i - beta_j) U(S)] is enumerated exactly
        THEN:  Z times it equals the exact Shapley difference for every pair
        """
        for game in small_games.values():
            dist = build_distribution(game.n_players, ORIGINAL)
            phi = exact_shapley(game).values
            for i, j in itertools.combinations(range(game.n_players), 2):
                expectation = exact_statistic_expectation(dist, game, i, j)
                assert dist.Z * expectation == pytest.approx(phi[i] - phi[j], abs=1e-12)

    def test_augmented_recovers_shapley_values(self, small_games):
        """
        GIVEN: Small games augmented with a dummy pivot and the augmented size distribution
        WHEN:  E[(beta_i - beta_pivot) U'(S)] is enumerated exactly
        THEN:  Z times it equals phi_i of the original game
        """
        for game in small_games.values():
            augmented = augment_with_dummy(game)
            dist = build_distribution(game.n_players, AUGMENTED)
            phi = exact_shapley(game).values
            for i in range(game.n_players):
                expectation = exact_statistic_expectation(dist, augmented, i, dist.pivot)
                assert dist.Z * expectation == pytest.approx(phi[i], abs=1e-12)

    def test_rejects_mismatched_distribution(self, glove_game):
        with pytest.raises(InvalidParameter):
            exact_statistic_expectation(build_distribution(4, ORIGINAL), glove_game, 0, 1)

    def test_size_limit(self):
        game = make_threshold_game(15, 3)
        with pytest.raises(SizeLimitExceeded):
            exact_statistic_expectation(build_distribution(15, ORIGINAL), game, 0, 1)


class TestStatisticMoments:
    @pytest.mark.parametrize("variant", [ORIGINAL, AUGMENTED])
    def test_second_moment_bounded_by_pair_mass(self, small_games, variant):
        """
        GIVEN: Small games, including one with U(empty) > 0
        WHEN:  The exact moments of the shifted single-sample statistic are computed
        THEN:  Z times the mean is the Shapley difference and the second moment is at most 1 - q_tot
        """
        for game in small_games.values():
            phi = exact_shapley(game).values
            sampled = game if variant == ORIGINAL else augment_with_dummy(game)
            dist = build_distribution(game.n_players, variant)
            bound = 1.0 - q_tot(dist)
            for i, j in itertools.combinations(range(sampled.n_players), 2):
                mean, second = exact_statistic_moments(dist, sampled, i, j)
                expected = (phi[i] if i < game.n_players else 0.0) - (phi[j] if j < game.n_players else 0.0)
                assert dist.Z * mean == pytest.approx(expected, abs=1e-12)
                assert 0.0 <= second <= bound + 1e-12

    def test_two_over_z(self):
        dist = build_distribution(6, ORIGINAL)
        assert 1.0 - q_tot(dist) == pytest.approx(2.0 / dist.Z, abs=1e-12)
        assert math.isclose(dist.Z * (1.0 - q_tot(dist)), 2.0, abs_tol=1e-12)
