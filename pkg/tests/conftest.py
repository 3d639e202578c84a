import os
from pathlib import Path

import pytest

from shapley_estimation.config import temp_config
from shapley_estimation.games import (
    make_additive_game,
    make_glove_game,
    make_random_bounded_game,
    make_threshold_game,
    make_unanimity_game,
)
from shapley_estimation.model import EvalCache

TEST_DATA_DIR = Path(os.path.dirname(__file__)) / "data"


def pytest_configure(config):
    """Add configuration options to Pytest"""
    # Register custom markers
    config.addinivalue_line(
        "markers", "needsdocstring: Missing or incomplete GIVEN/WHEN/THEN docstring"
    )
    config.addinivalue_line(
        "markers", "slow: Monte Carlo or enumeration-heavy check taking more than a few seconds"
    )


@pytest.fixture
def config_override():
    """
    Yields the dictionary consulted by Configuration before the environment. Anything the test
    puts in it is discarded afterwards.
    """
    with temp_config({}) as overrides:
        yield overrides


@pytest.fixture
def cache():
    return EvalCache()


##############################################################################
# Games
##############################################################################

@pytest.fixture
def additive_game():
    """Weights (0.5, 0.3, 0.2); phi equals the weights."""
    return make_additive_game([0.5, 0.3, 0.2])


@pytest.fixture
def threshold_game():
    """Five players, quota three; every player gets 0.2."""
    return make_threshold_game(5, 3)


@pytest.fixture
def glove_game():
    """Left gloves {0, 1}, right glove {2}; phi = (1/6, 1/6, 2/3)."""
    return make_glove_game({0, 1}, {2})


@pytest.fixture
def glove_game_6():
    """Three left and three right gloves."""
    return make_glove_game({0, 1, 2}, {3, 4, 5})


@pytest.fixture
def glove_game_8():
    """Four left and four right gloves."""
    return make_glove_game({0, 1, 2, 3}, {4, 5, 6, 7})


@pytest.fixture
def unanimity_game():
    """Carrier {0, 1} among three players; player 2 is a dummy."""
    return make_unanimity_game(3, {0, 1})


@pytest.fixture
def random_game():
    """Five players with independent uniform utilities; U(empty) is not zero."""
    return make_random_bounded_game(5, seed=7)


@pytest.fixture
def small_games():
    """One game per family, all small enough for every brute-force oracle."""
    return {
        "additive": make_additive_game([0.1, 0.25, 0.05, 0.3, 0.2]),
        "threshold": make_threshold_game(5, 3),
        "glove": make_glove_game({0, 1, 4}, {2, 3}),
        "unanimity": make_unanimity_game(5, {1, 3}),
        "random_bounded": make_random_bounded_game(5, seed=11),
    }
