import argparse
import logging
import sys
from pathlib import Path

from shapley_estimation.bounds import BoundQuery, bound_for
from shapley_estimation.config import (
    CannotLoadConfiguration,
    Configuration,
    parse_setting,
    temp_config,
)
from shapley_estimation.constants import (
    BENCH_HEADER,
    BOUND_HEADER,
    COVERAGE_SUMMARY_HEADER,
    ESTIMATE_HEADER,
    EXACT_HEADER,
    METHOD_CLI_NAMES,
    TRIAL_HEADER,
    VARIANTS,
)
from shapley_estimation.exact import exact_shapley, exact_shapley_by_permutations
from shapley_estimation.game_loader import GameLoader
from shapley_estimation.harness import (
    CoverageCheckFailed,
    ExperimentConfig,
    bench_plan,
    bench_table,
    budget_for,
    coverage_plan,
    coverage_summary,
    diagnose,
    diagnose_rows,
    method_from_name,
    run_estimate,
    run_trials,
    trial_rows,
    write_csv,
    write_metadata,
)
from shapley_estimation.log import LogConfiguration
from shapley_estimation.model import ShapleyError
from shapley_estimation.model_helpers import load_cache, save_cache
from shapley_estimation.problem_details import INVALID_DEFINITION_FILE


class Script:
    """
    Base class for the `shapley` subcommands.

    Subclasses define arg_parser() and do_run(). run() turns expected failures into a one-line
    message on stderr and the matching exit status.
    """
    name = None

    @property
    def log(self):
        if not hasattr(self, '_log'):
            logger_name = getattr(self, 'name', None)
            self._log = logging.getLogger(logger_name)
        return self._log

    @classmethod
    def parse_command_line(cls, cmd_args=None):
        parser = cls.arg_parser()
        return parser.parse_args(cmd_args)

    @classmethod
    def arg_parser(cls):
        parser = argparse.ArgumentParser(prog="shapley %s" % cls.name, description=cls.__doc__)
        parser.add_argument(
            '--setting', action='append', default=[],
            help='Override a configuration setting for this run. Format: --setting="SHAPLEY_N_JOBS=4"'
        )
        return parser

    def run(self, cmd_args=None, stdout=sys.stdout, stderr=sys.stderr, initialize_logging=False):
        """
        :param initialize_logging: set up logging handlers once the --setting overrides apply
        :return: (int) - the process exit status
        """
        try:
            parsed = self.parse_command_line(cmd_args)
            settings = dict(parse_setting(s) for s in parsed.setting)
            with temp_config(dict(Configuration.instance or {}, **settings)):
                if initialize_logging:
                    LogConfiguration.initialize()
                return self.do_run(parsed, stdout) or 0
        except (ShapleyError, CannotLoadConfiguration) as e:
            problem = self.problem_for(e)
            self.log.debug("Problem document: %s", problem.document)
            stderr.write(problem.message + "\n")
            return problem.exit_status
        except Exception as e:
            logging.error(
                "Fatal exception while running script: %s", e,
                exc_info=e
            )
            raise e

    @staticmethod
    def problem_for(error):
        """The ProblemDetail reported for an expected failure, with its underlying cause if any."""
        if isinstance(error, ShapleyError):
            problem = error.problem
        else:
            problem = INVALID_DEFINITION_FILE.detailed(str(error))
        if error.__cause__ is not None:
            problem = problem.with_debug(repr(error.__cause__))
        return problem

    def do_run(self, parsed, stdout):
        raise NotImplementedError()


class GameScript(Script):
    """A script that operates on one game read from a definition file."""
    REQUIRES_GAME = True

    @classmethod
    def arg_parser(cls):
        parser = super(GameScript, cls).arg_parser()
        parser.add_argument('--game', help='Game definition file (key=value).', required=cls.REQUIRES_GAME)
        parser.add_argument('--cache', help='Persistent utility cache; created if absent.')
        parser.add_argument('--out', help='Output CSV file. Defaults to standard output.')
        return parser

    def open_cache(self, path, n_players):
        return load_cache(path, n_players) if path else None

    def close_cache(self, cache, path):
        if path and cache is not None:
            save_cache(cache, path)


class ExperimentScript(GameScript):
    """A script whose settings may come from an experiment config file, flags taking precedence."""
    REQUIRES_GAME = False

    @classmethod
    def arg_parser(cls):
        parser = super(ExperimentScript, cls).arg_parser()
        parser.add_argument('--config', help='Experiment config file (key=value).')
        parser.add_argument(
            '--method', action='append', choices=sorted(METHOD_CLI_NAMES),
            help='Estimator to run; repeat for several.'
        )
        parser.add_argument('--epsilon', type=float, help='Target l2 error.')
        parser.add_argument('--delta', type=float, help='Allowed failure probability.')
        parser.add_argument('--seed', type=int, help='Master seed (default 0).')
        return parser

    @classmethod
    def experiment(cls, parsed, budgets=None, n_trials=None):
        overrides = dict(
            game=Path(parsed.game) if parsed.game else None,
            methods=tuple(parsed.method or ()),
            epsilon=parsed.epsilon,
            delta=parsed.delta,
            budgets=tuple(budgets or ()),
            n_trials=n_trials,
            master_seed=parsed.seed,
            cache_path=Path(parsed.cache) if parsed.cache else None,
        )
        if parsed.config:
            return ExperimentConfig.from_file(parsed.config, **overrides)

        if overrides["game"] is None:
            raise CannotLoadConfiguration("Give a game with --game or a --config file naming one")
        kwargs = {k: v for k, v in overrides.items() if v is not None}
        return ExperimentConfig(**kwargs)


class ExactScript(GameScript):
    """Compute exact Shapley values by enumerating every coalition."""
    name = "exact"

    @classmethod
    def arg_parser(cls):
        parser = super(ExactScript, cls).arg_parser()
        parser.add_argument(
            '--by-permutations', action='store_true',
            help='Average over all N! orderings instead (at most 9 players).'
        )
        return parser

    def do_run(self, parsed, stdout):
        u = GameLoader().load_file(parsed.game).build()
        cache = self.open_cache(parsed.cache, u.n_players)
        oracle = exact_shapley_by_permutations if parsed.by_permutations else exact_shapley
        phi = oracle(u, cache)
        write_csv(parsed.out or stdout, EXACT_HEADER, list(enumerate(phi.values.tolist())))
        self.close_cache(cache, parsed.cache)


class EstimateScript(ExperimentScript):
    """Estimate Shapley values with one or more Monte Carlo estimators."""
    name = "estimate"

    @classmethod
    def arg_parser(cls):
        parser = super(EstimateScript, cls).arg_parser()
        parser.add_argument(
            '--budget', type=int,
            help='Samples (permutations for perm) to draw; overrides the bound-derived budget.'
        )
        return parser

    @staticmethod
    def per_method_path(out, method, n_methods):
        """The CSV for one method; several methods get the method name inserted before the suffix."""
        out = Path(out)
        if n_methods == 1:
            return out
        return out.with_name("%s.%s%s" % (out.stem, method, out.suffix))

    def do_run(self, parsed, stdout):
        config = self.experiment(parsed, budgets=None if parsed.budget is None else [parsed.budget])
        target = config.output_path(parsed.out, "estimate.csv")
        if target is None:
            raise CannotLoadConfiguration("estimate needs --out (or an output_dir) for its CSV and metadata files")

        u = config.load_game()
        cache = self.open_cache(config.cache_path, u.n_players)
        seed = config.master_seed
        override = config.budgets[0] if config.budgets else None

        for method in config.methods:
            T = budget_for(method, u.n_players, config.epsilon, config.delta, override)
            report = run_estimate(u, method, T, seed, config.epsilon, config.delta, cache)
            out = self.per_method_path(target, method, len(config.methods))
            write_csv(out, ESTIMATE_HEADER, list(enumerate(report.phi_hat.values.tolist())))
            write_metadata(out, report.metadata)
            self.log.info("Wrote %s estimate to %s", method, out)

        self.close_cache(cache, config.cache_path)


class BoundScript(Script):
    """Print the sample budget guaranteeing an (epsilon, delta)-approximation."""
    name = "bound"

    @classmethod
    def arg_parser(cls):
        parser = super(BoundScript, cls).arg_parser()
        parser.add_argument('--n', type=int, required=True, help='Number of players.')
        parser.add_argument('--epsilon', type=float, required=True)
        parser.add_argument('--delta', type=float, required=True)
        parser.add_argument('--variant', choices=sorted(METHOD_CLI_NAMES), required=True)
        parser.add_argument('--out', help='Output CSV file. Defaults to standard output.')
        return parser

    def do_run(self, parsed, stdout):
        query = BoundQuery(parsed.n, parsed.epsilon, parsed.delta, method_from_name(parsed.variant))
        result = bound_for(query)
        row = (
            query.variant, query.n_players, query.epsilon, query.delta, result.T,
            result.utility_evals, result.Z, result.q_tot,
        )
        write_csv(parsed.out or stdout, BOUND_HEADER, [row])


class CoverageScript(ExperimentScript):
    """Measure how often estimates land within epsilon of the exact values at the bound's budget."""
    name = "coverage"

    @classmethod
    def arg_parser(cls):
        parser = super(CoverageScript, cls).arg_parser()
        parser.add_argument('--trials', type=int, help='Seeded trials per method (default 1).')
        parser.add_argument('--budget', type=int, help='Override the bound-derived budget.')
        parser.add_argument(
            '--check', action='store_true',
            help='Exit with status 7 when a method covers fewer than 1 - delta of its trials.'
        )
        return parser

    def do_run(self, parsed, stdout):
        budgets = None if parsed.budget is None else [parsed.budget]
        config = self.experiment(parsed, budgets=budgets, n_trials=parsed.trials)
        out = config.output_path(parsed.out, "trials.csv")
        if out is None:
            raise CannotLoadConfiguration("coverage needs --out (or an output_dir) for the per-trial CSV")
        if config.epsilon is None or config.delta is None:
            raise CannotLoadConfiguration("coverage needs both epsilon and delta")

        u = config.load_game()
        cache = self.open_cache(config.cache_path, u.n_players)
        records = run_trials(
            u, coverage_plan(config, u.n_players), config.n_trials, config.master_seed,
            epsilon=config.epsilon, delta=config.delta, cache=cache,
        )
        write_csv(out, TRIAL_HEADER, trial_rows(records))
        summary = coverage_summary(records, config.epsilon, config.delta)
        write_csv(stdout, COVERAGE_SUMMARY_HEADER, summary)
        self.close_cache(cache, config.cache_path)

        failing = [row for row in summary if row[4] < row[5]]
        if parsed.check and failing:
            method, T, n_trials, covered, coverage, target = failing[0]
            raise CoverageCheckFailed(
                "%s covered %d of %d trials at T=%d (%.3f < %.3f)" % (method, covered, n_trials, T, coverage, target)
            )


class BenchScript(ExperimentScript):
    """Tabulate mean l2 error against budget for each method."""
    name = "bench"

    @classmethod
    def arg_parser(cls):
        parser = super(BenchScript, cls).arg_parser()
        parser.add_argument('--budgets', help='Comma separated budgets, e.g. 2000,8000.')
        parser.add_argument('--trials', type=int, help='Seeded trials per method and budget (default 1).')
        parser.add_argument('--trials-out', help='Also write every TrialRecord to this CSV.')
        return parser

    def do_run(self, parsed, stdout):
        budgets = [int(b) for b in parsed.budgets.split(",")] if parsed.budgets else None
        config = self.experiment(parsed, budgets=budgets, n_trials=parsed.trials)

        u = config.load_game()
        cache = self.open_cache(config.cache_path, u.n_players)
        records = run_trials(
            u, bench_plan(config), config.n_trials, config.master_seed,
            epsilon=config.epsilon, delta=config.delta, cache=cache,
        )
        trials_out = config.output_path(parsed.trials_out)
        if trials_out:
            write_csv(trials_out, TRIAL_HEADER, trial_rows(records))
        write_csv(config.output_path(parsed.out) or stdout, BENCH_HEADER, bench_table(records, u.n_players))
        self.close_cache(cache, config.cache_path)


class DiagnoseScript(Script):
    """Report Z, q_tot and the fraction of samples that inform a pairwise difference."""
    name = "diagnose"

    @classmethod
    def arg_parser(cls):
        parser = super(DiagnoseScript, cls).arg_parser()
        parser.add_argument('--n', type=int, required=True, help='Number of players.')
        parser.add_argument('--variant', choices=VARIANTS, default=VARIANTS[0])
        parser.add_argument('--empirical', type=int, metavar='T', help='Also measure the fraction over T draws.')
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--out', help='Output CSV file. Defaults to standard output.')
        return parser

    def do_run(self, parsed, stdout):
        header, rows = diagnose_rows(diagnose(parsed.n, parsed.variant, parsed.empirical, parsed.seed))
        write_csv(parsed.out or stdout, header, rows)


SCRIPTS = {
    script.name: script
    for script in (ExactScript, EstimateScript, BoundScript, CoverageScript, BenchScript, DiagnoseScript)
}


def main(cmd_args=None, stdout=sys.stdout, stderr=sys.stderr):
    """Entry point of the `shapley` command: `shapley <subcommand> [options]`."""
    cmd_args = list(sys.argv[1:] if cmd_args is None else cmd_args)
    if not cmd_args or cmd_args[0] not in SCRIPTS:
        stderr.write("usage: shapley {%s} [options]\n" % ",".join(SCRIPTS))
        return 2

    return SCRIPTS[cmd_args[0]]().run(cmd_args[1:], stdout, stderr, initialize_logging=True)
