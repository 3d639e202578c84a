import contextlib
import copy
import logging
import os


@contextlib.contextmanager
def temp_config(new_config=None, replacement_classes=None):
    old_config = Configuration.instance
    replacement_classes = replacement_classes or [Configuration]

    if new_config is None:
        new_config = copy.deepcopy(old_config) or {}

    try:
        for c in replacement_classes:
            c.instance = new_config
        yield new_config
    finally:
        for c in replacement_classes:
            c.instance = old_config


class CannotLoadConfiguration(Exception):
    pass


class Configuration:
    ##### Class Constants ####################################################  # noqa: E266
    instance = None

    log = logging.getLogger("Configuration loader")

    # Largest player count a Coalition may be built for.
    MAX_PLAYERS = 'SHAPLEY_MAX_PLAYERS'
    DEFAULT_MAX_PLAYERS = 1024

    # Largest player count the brute-force oracles will enumerate (2^N subsets).
    EXACT_MAX_PLAYERS = 'SHAPLEY_EXACT_MAX_PLAYERS'
    DEFAULT_EXACT_MAX_PLAYERS = 20

    # Number of parallel workers used for independent trials.
    N_JOBS = 'SHAPLEY_N_JOBS'
    DEFAULT_N_JOBS = 1

    # Logging policy.
    LOG_LEVEL = 'SHAPLEY_LOG_LEVEL'
    LOG_FORMAT = 'SHAPLEY_LOG_FORMAT'
    LIBRARY_LOG_LEVEL = 'SHAPLEY_LIBRARY_LOG_LEVEL'
    LOG_MESSAGE_TEMPLATE = 'SHAPLEY_LOG_MESSAGE_TEMPLATE'
    LOGGLY_TOKEN = 'SHAPLEY_LOGGLY_TOKEN'
    LOGGLY_URL = 'SHAPLEY_LOGGLY_URL'

    ##### Class Methods ######################################################  # noqa: E266

    @classmethod
    def get(cls, key, default=None):
        """
        Look up a setting, first in the active override dictionary, then in the environment.

        :param key: Name of the setting (also the name of its environment variable)
        :param default: Value returned when the setting is absent or empty
        """
        if cls.instance and cls.instance.get(key) not in (None, ''):
            return cls.instance[key]

        value = os.environ.get(key)
        if value in (None, ''):
            return default
        return value

    @classmethod
    def max_players(cls):
        return cls._positive_int(cls.MAX_PLAYERS, cls.DEFAULT_MAX_PLAYERS)

    @classmethod
    def exact_max_players(cls):
        return cls._positive_int(cls.EXACT_MAX_PLAYERS, cls.DEFAULT_EXACT_MAX_PLAYERS)

    @classmethod
    def n_jobs(cls):
        return cls._positive_int(cls.N_JOBS, cls.DEFAULT_N_JOBS)

    @classmethod
    def loggly_token(cls):
        return cls.get(cls.LOGGLY_TOKEN)

    ##### Private Class Methods ##############################################  # noqa: E266

    @classmethod
    def _positive_int(cls, key, default):
        value = cls.get(key, default)
        try:
            value = int(value)
        except (TypeError, ValueError):
            raise CannotLoadConfiguration(f"Setting {key} must be an integer, got {value!r}.")

        if value < 1:
            raise CannotLoadConfiguration(f"Setting {key} must be positive, got {value}.")

        return value


def parse_setting(setting):
    """Parse a single 'key=value' line into a stripped (key, value) pair."""
    if '=' not in setting:
        raise CannotLoadConfiguration(
            'Incorrect format for setting: "%s". Should be "key=value"' % setting
        )
    key, value = setting.split('=', 1)
    return key.strip(), value.strip()


def load_settings_file(path):
    """
    Read a flat key=value file into a dictionary.

    Blank lines and lines starting with '#' are ignored. A key appearing twice is an error,
    since the files are meant to be diffed and reviewed by hand.

    :param path: (pathlib.Path or str) - location of the file
    :return: (dict) - setting name to raw string value, in file order
    """
    settings = {}
    with open(path, encoding='utf-8') as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            try:
                key, value = parse_setting(line)
            except CannotLoadConfiguration as e:
                raise CannotLoadConfiguration(f"{path}, line {lineno}: {e}") from e
            if key in settings:
                raise CannotLoadConfiguration(f"{path}, line {lineno}: duplicate key '{key}'")
            settings[key] = value
    return settings
