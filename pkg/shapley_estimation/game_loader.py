from pathlib import Path

from shapley_estimation.config import CannotLoadConfiguration, load_settings_file
from shapley_estimation.constants import ADDITIVE, GLOVE, THRESHOLD, UNANIMITY
from shapley_estimation.games import GameFamilyConfig
from shapley_estimation.model import GameFileNotFound, InvalidParameter
from shapley_estimation.util.string_helpers import parse_float_list, parse_int_list


class GameLoader:
    """
    Load GameFamilyConfig objects from flat key=value game definition files like:

        # three-player glove market
        family = glove
        n_players = 3
        left = 0,1
        right = 2

    Recognized keys are `family`, `n_players`, `label`, `seed` and the family parameters
    `weights`, `quota`, `left`, `right`, `carrier`. Lists are comma separated.
    """
    KEYS = ('family', 'n_players', 'label', 'seed', 'weights', 'quota', 'left', 'right', 'carrier')

    INT_LIST_PARAMETERS = ('left', 'right', 'carrier')

    def __init__(self):
        self.configs_by_path = {}

    def load_file(self, path):
        path = Path(path)
        if not path.is_file():
            raise GameFileNotFound(f"No game definition file at {path}")

        resolved = path.resolve()
        if resolved not in self.configs_by_path:
            self.configs_by_path[resolved] = self.load(load_settings_file(path), source=str(path))
        return self.configs_by_path[resolved]

    def load(self, settings, source="game definition"):
        unknown = sorted(set(settings) - set(self.KEYS))
        if unknown:
            raise CannotLoadConfiguration(f"{source}: unknown key(s) {', '.join(unknown)}")

        for key in ('family', 'n_players'):
            if key not in settings:
                raise CannotLoadConfiguration(f"{source}: missing required key '{key}'")

        try:
            n_players = int(settings['n_players'])
            seed = int(settings['seed']) if 'seed' in settings else None

            parameters = {}
            if 'weights' in settings:
                parameters['weights'] = parse_float_list(settings['weights'])
            if 'quota' in settings:
                parameters['quota'] = int(settings['quota'])
            for key in self.INT_LIST_PARAMETERS:
                if key in settings:
                    parameters[key] = parse_int_list(settings[key])
        except ValueError as e:
            raise CannotLoadConfiguration(f"{source}: {e}") from e

        family = settings['family']
        self._check_parameters(family, parameters, source)

        try:
            return GameFamilyConfig(
                family=family,
                n_players=n_players,
                parameters=parameters,
                seed=seed,
                label=settings.get('label') or None,
            )
        except InvalidParameter as e:
            raise CannotLoadConfiguration(f"{source}: {e}") from e

    @staticmethod
    def _check_parameters(family, parameters, source):
        # Parameters belonging to a different family are almost always a copy-paste mistake.
        expected = {
            ADDITIVE: {'weights'},
            THRESHOLD: {'quota'},
            GLOVE: {'left', 'right'},
            UNANIMITY: {'carrier'},
        }.get(family, set())
        stray = sorted(set(parameters) - expected)
        if stray:
            raise CannotLoadConfiguration(f"{source}: parameter(s) {', '.join(stray)} do not apply to {family} games")


def load_game(path, loader=None):
    """Load a game definition file and build the game it describes."""
    loader = loader or GameLoader()
    return loader.load_file(path).build()
