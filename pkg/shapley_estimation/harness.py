"""
Experiment harness: runs estimators against exact ground truth, tabulates coverage and
convergence, and writes the CSV and metadata files the command line produces.
"""
import csv
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from shapley_estimation.bounds import BoundQuery, bound_for
from shapley_estimation.config import CannotLoadConfiguration, Configuration, load_settings_file
from shapley_estimation.constants import (
    DIAGNOSE_HEADER,
    GT_ORIGINAL,
    METHOD_CLI_NAMES,
    METHODS,
    PERMUTATION,
)
from shapley_estimation.estimators import (
    group_testing_improved_estimate,
    group_testing_original_estimate,
    permutation_sampling_estimate,
)
from shapley_estimation.exact import exact_shapley
from shapley_estimation.game_loader import GameLoader
from shapley_estimation.games import GameFamilyConfig
from shapley_estimation.model import EvalCache, InvalidParameter, ShapleyError, UtilitySpec
from shapley_estimation.problem_details import COVERAGE_CHECK_FAILED
from shapley_estimation.sampling import build_distribution, draw_memberships, effective_fraction, q_tot
from shapley_estimation.util import derive_seed
from shapley_estimation.util.string_helpers import format_real, parse_int_list


class CoverageCheckFailed(ShapleyError):
    problem_detail = COVERAGE_CHECK_FAILED


def method_from_name(name):
    """Accept either a command-line name (perm, gt, gt-improved) or a method constant."""
    if name in METHODS:
        return name
    if name in METHOD_CLI_NAMES:
        return METHOD_CLI_NAMES[name]
    raise InvalidParameter(
        f"Unknown method '{name}'; expected one of {', '.join(sorted(METHOD_CLI_NAMES))}"
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Everything a coverage or bench run depends on. Identical configs give identical CSVs.

    `game` is a GameFamilyConfig, a path to a game definition file, or an already built game.
    """
    game: object
    methods: Tuple[str, ...]
    epsilon: Optional[float] = None
    delta: Optional[float] = None
    budgets: Tuple[int, ...] = ()
    n_trials: int = 1
    master_seed: int = 0
    output_dir: Optional[Path] = None
    cache_path: Optional[Path] = None

    # Settings an experiment config file may contain.
    KEYS = ('game', 'methods', 'epsilon', 'delta', 'budgets', 'n_trials', 'seed', 'output_dir', 'cache')

    def __post_init__(self):
        methods = tuple(method_from_name(m) for m in self.methods)
        if not methods:
            raise InvalidParameter("An experiment needs at least one method")
        object.__setattr__(self, "methods", methods)

        if self.n_trials < 1:
            raise InvalidParameter(f"n_trials must be at least 1, got {self.n_trials}")

        bad = [b for b in self.budgets if b < 1]
        if bad:
            raise InvalidParameter(f"Budgets must be at least 1, got {bad[0]}")
        object.__setattr__(self, "budgets", tuple(int(b) for b in self.budgets))

        if self.epsilon is not None and not self.epsilon > 0:
            raise InvalidParameter(f"epsilon must be positive, got {self.epsilon}")
        if self.delta is not None and not 0 < self.delta < 1:
            raise InvalidParameter(f"delta must lie in (0, 1), got {self.delta}")

    @classmethod
    def from_file(cls, path, **overrides):
        """
        Read a key=value experiment file. Relative `game` paths resolve against the file's
        directory, and so do `output_dir` and `cache`. Keyword arguments that are not None replace
        file settings.
        """
        path = Path(path)
        settings = load_settings_file(path)
        unknown = sorted(set(settings) - set(cls.KEYS))
        if unknown:
            raise CannotLoadConfiguration(f"{path}: unknown key(s) {', '.join(unknown)}")

        try:
            values = {
                "game": path.parent / settings["game"] if "game" in settings else None,
                "methods": tuple(m.strip() for m in settings.get("methods", "").split(",") if m.strip()),
                "epsilon": float(settings["epsilon"]) if "epsilon" in settings else None,
                "delta": float(settings["delta"]) if "delta" in settings else None,
                "budgets": tuple(parse_int_list(settings.get("budgets"))),
                "n_trials": int(settings.get("n_trials", 1)),
                "master_seed": int(settings.get("seed", 0)),
                "output_dir": path.parent / settings["output_dir"] if "output_dir" in settings else None,
                "cache_path": path.parent / settings["cache"] if "cache" in settings else None,
            }
        except ValueError as e:
            raise CannotLoadConfiguration(f"{path}: {e}") from e

        values.update({k: v for k, v in overrides.items() if v not in (None, (), [])})
        if values["game"] is None:
            raise CannotLoadConfiguration(f"{path}: no game given")
        return cls(**values)

    def output_path(self, name, default=None):
        """
        Where an output file goes. A relative `name` is placed under output_dir when one is set;
        without a name, `default` under output_dir, or None.
        """
        if name is None:
            if default is None or self.output_dir is None:
                return None
            name = default
        path = Path(name)
        if self.output_dir is not None and not path.is_absolute():
            path = Path(self.output_dir) / path
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def load_game(self):
        if isinstance(self.game, UtilitySpec):
            return self.game
        if isinstance(self.game, GameFamilyConfig):
            return self.game.build()
        return GameLoader().load_file(self.game).build()


@dataclass(frozen=True)
class TrialRecord:
    method: str
    trial_index: int
    T: int
    l2_error: float
    linf_error: float
    utility_evals: int
    seed: int
    residual: Optional[float] = None

    @property
    def sort_key(self):
        return (self.method, self.T, self.trial_index)

    def as_row(self):
        return (
            self.method, self.trial_index, self.T, format_real(self.l2_error),
            format_real(self.linf_error), self.utility_evals, format_real(self.residual), self.seed,
        )


def run_estimate(u, method, T, seed, epsilon=None, delta=None, cache=None):
    """Run one estimator by method name and return its EstimationReport."""
    method = method_from_name(method)
    if method == PERMUTATION:
        report = permutation_sampling_estimate(u, T, seed, cache=cache, delta=delta)
    elif method == GT_ORIGINAL:
        if epsilon is None:
            raise InvalidParameter("The gt method needs epsilon for its feasibility tolerance")
        report = group_testing_original_estimate(u, T, epsilon, seed, cache=cache, delta=delta)
    else:
        report = group_testing_improved_estimate(u, T, seed, cache=cache, delta=delta, epsilon=epsilon)
    return report


def budget_for(method, n_players, epsilon=None, delta=None, override=None):
    """`override` when given, otherwise the bound-derived T for (epsilon, delta)."""
    if override is not None:
        if override < 1:
            raise InvalidParameter(f"Budget must be at least 1, got {override}")
        return int(override)

    if epsilon is None or delta is None:
        raise InvalidParameter("Give either a budget or both epsilon and delta")
    return bound_for(BoundQuery(n_players, epsilon, delta, method_from_name(method))).T


def nominal_evaluations(method, T, n_players):
    """Utility evaluations a run of budget T nominally costs, before caching."""
    return T * (n_players + 1) if method == PERMUTATION else T


def _trial(u, truth, method, T, trial_index, master_seed, epsilon, delta, cache):
    seed = derive_seed(master_seed, trial_index)
    report = run_estimate(u, method, T, seed, epsilon=epsilon, delta=delta, cache=cache)
    error = np.asarray(report.phi_hat.values) - truth
    record = TrialRecord(
        method=method,
        trial_index=trial_index,
        T=T,
        l2_error=float(np.linalg.norm(error)),
        linf_error=float(np.max(np.abs(error))),
        utility_evals=report.utility_evals,
        seed=seed,
        residual=report.feasibility_residual,
    )
    return record, cache


def ground_truth(u):
    """Exact Shapley values, evaluated on a cache of their own so trial budgets stay honest."""
    return np.asarray(exact_shapley(u, EvalCache()).values)


def run_trials(u, plan, n_trials, master_seed, epsilon=None, delta=None, cache=None, n_jobs=None, truth=None):
    """
    Run n_trials seeded estimations for every (method, T) in `plan`.

    Trial t uses seed derive_seed(master_seed, t) and a private fork of `cache`; the forks are
    merged back once every trial is done, so results do not depend on n_jobs.

    :return: (list[TrialRecord]) - sorted by (method, T, trial_index)
    """
    cache = cache if cache is not None else EvalCache()
    truth = ground_truth(u) if truth is None else np.asarray(truth)
    n_jobs = n_jobs or Configuration.n_jobs()

    tasks = [(method, T, t) for method, T in plan for t in range(n_trials)]
    log = logging.getLogger(__name__)
    log.info("Running %d trials of %s with %d job(s)", len(tasks), u.label or "game", n_jobs)

    with Parallel(n_jobs=n_jobs) as parallel:
        results = parallel(
            delayed(_trial)(u, truth, method, T, t, master_seed, epsilon, delta, cache.fork())
            for method, T, t in tqdm(tasks, desc="trials", disable=not sys.stderr.isatty())
        )

    records = []
    for record, fork in results:
        cache.merge(fork)
        records.append(record)
    return sorted(records, key=lambda r: r.sort_key)


def coverage_plan(config, n_players):
    """(method, T) pairs of a coverage run: one bound-derived (or overridden) T per method."""
    override = config.budgets[0] if config.budgets else None
    return [
        (method, budget_for(method, n_players, config.epsilon, config.delta, override))
        for method in config.methods
    ]


def bench_plan(config):
    if not config.budgets:
        raise InvalidParameter("A bench run needs at least one budget")
    return [(method, T) for method in config.methods for T in config.budgets]


def coverage_summary(records, epsilon, delta):
    """
    One row per (method, T): trials, trials within epsilon in l2, their fraction, and 1 - delta.
    """
    rows = []
    groups = {}
    for record in records:
        groups.setdefault((record.method, record.T), []).append(record)

    for (method, T), group in sorted(groups.items()):
        covered = sum(1 for r in group if r.l2_error <= epsilon)
        rows.append((method, T, len(group), covered, covered / len(group), 1.0 - delta))
    return rows


def bench_table(records, n_players):
    """One row per (method, T): nominal evaluations and the mean and spread of l2 error."""
    groups = {}
    for record in records:
        groups.setdefault((record.method, record.T), []).append(record.l2_error)

    rows = []
    for (method, T), errors in sorted(groups.items()):
        errors = np.asarray(errors)
        rows.append((method, T, nominal_evaluations(method, T, n_players), float(errors.mean()), float(errors.std())))
    return rows


def diagnose(n_players, variant, empirical_T=None, seed=0):
    """
    Sample-reuse figures for one player count: Z, q_tot, the effective fraction 1 - q_tot and 2/Z,
    plus the fraction measured on players 0 and 1 over empirical_T draws when requested.
    """
    dist = build_distribution(n_players, variant)
    qt = q_tot(dist)
    row = {
        "n": n_players,
        "variant": variant,
        "Z": dist.Z,
        "q_tot": qt,
        "effective_fraction": 1.0 - qt,
        "two_over_Z": 2.0 / dist.Z,
    }
    if empirical_T is not None:
        row["empirical_fraction"] = effective_fraction(draw_memberships(dist, empirical_T, seed), 0, 1)
    return row


##### CSV and metadata output ################################################  # noqa: E266

def _format_field(value):
    if isinstance(value, float):
        return format_real(value)
    if value is None:
        return ""
    return str(value)


def write_csv(out, header, rows):
    """
    Write a header line and rows. Floats get 15 significant digits.

    :param out: a path, or an open text stream such as sys.stdout
    """
    if not hasattr(out, "write"):
        with open(out, "w", newline="", encoding="utf-8") as fh:
            write_csv(fh, header, rows)
        return

    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([_format_field(v) for v in row] for row in rows)


def trial_rows(records):
    return [r.as_row() for r in records]


def diagnose_rows(row):
    header = list(DIAGNOSE_HEADER)
    if "empirical_fraction" in row:
        header.append("empirical_fraction")
    return header, [tuple(row[h] for h in header)]


def metadata_path(out):
    out = Path(out)
    return out.with_name(out.name + ".meta.json")


def write_metadata(out, metadata):
    """Write `<out>.meta.json` with sorted keys."""
    path = metadata_path(out)
    path.write_text(json.dumps(metadata, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path

