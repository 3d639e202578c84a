import json
import logging
from io import StringIO

import pytest

from shapley_estimation.bounds import BoundQuery, required_T
from shapley_estimation.config import CannotLoadConfiguration, Configuration
from shapley_estimation.constants import GT_IMPROVED
from shapley_estimation.log import LogConfiguration
from shapley_estimation.model import InvalidParameter
from shapley_estimation.scripts import (
    SCRIPTS,
    BenchScript,
    BoundScript,
    CoverageScript,
    DiagnoseScript,
    EstimateScript,
    ExactScript,
    Script,
    main,
)

from .conftest import TEST_DATA_DIR

GLOVE3 = str(TEST_DATA_DIR / "glove3.game")
EXPERIMENT = str(TEST_DATA_DIR / "glove3.experiment")


def run(script_class, args):
    stdout, stderr = StringIO(), StringIO()
    status = script_class().run(args, stdout, stderr)
    return status, stdout.getvalue(), stderr.getvalue()


class TestExactScript:
    EXPECTED = "player,phi\n0,0.166666666666667\n1,0.166666666666667\n2,0.666666666666667\n"

    def test_exact(self):
        assert run(ExactScript, ["--game", GLOVE3]) == (0, self.EXPECTED, "")

    def test_by_permutations(self):
        assert run(ExactScript, ["--game", GLOVE3, "--by-permutations"]) == (0, self.EXPECTED, "")

    def test_writes_file_and_cache(self, tmp_path):
        out, cache = tmp_path / "phi.csv", tmp_path / "glove.cache"
        status, stdout, _ = run(ExactScript, ["--game", GLOVE3, "--out", str(out), "--cache", str(cache)])
        assert status == 0
        assert stdout == ""
        assert out.read_text() == self.EXPECTED
        assert len(cache.read_text().splitlines()) == 1 + 8

    def test_missing_game_file(self, tmp_path):
        """
        GIVEN: A game path that does not exist
        WHEN:  The exact script runs
        THEN:  It exits with status 3 and names the path on stderr
        """
        missing = str(tmp_path / "nope.game")
        status, stdout, stderr = run(ExactScript, ["--game", missing])
        assert status == 3
        assert stdout == ""
        assert missing in stderr

    def test_size_limit(self, tmp_path):
        game = tmp_path / "big.game"
        game.write_text("family = threshold\nn_players = 12\nquota = 3\n")
        status, _, stderr = run(ExactScript, ["--game", str(game), "--setting", "SHAPLEY_EXACT_MAX_PLAYERS=10"])
        assert status == 6
        assert "at most 10 players" in stderr

    def test_bad_setting(self):
        status, _, stderr = run(ExactScript, ["--game", GLOVE3, "--setting", "no-equals"])
        assert status == 4
        assert "key=value" in stderr


class TestEstimateScript:
    def test_smoke(self, tmp_path):
        """
        GIVEN: The three-player glove game
        WHEN:  gt-improved runs at the bound-derived budget for epsilon 0.5, delta 0.1
        THEN:  A three-row CSV and a metadata file are written, and a rerun gives the same bytes
        """
        out = tmp_path / "phi.csv"
        args = ["--game", GLOVE3, "--method", "gt-improved", "--epsilon", "0.5", "--delta", "0.1", "--out", str(out)]
        assert run(EstimateScript, args) == (0, "", "")

        lines = out.read_text().splitlines()
        assert lines[0] == "player,phi_hat"
        assert [line.split(",")[0] for line in lines[1:]] == ["0", "1", "2"]

        metadata = json.loads((tmp_path / "phi.csv.meta.json").read_text())
        assert metadata["method"] == GT_IMPROVED
        assert metadata["T"] == required_T(BoundQuery(3, 0.5, 0.1, GT_IMPROVED)).T
        assert metadata["seed"] == 0
        assert metadata["game"] == "glove3"
        assert 0 < metadata["utility_evals"] <= 8
        assert metadata["epsilon_guarantee"] <= 0.5

        first = out.read_bytes()
        assert run(EstimateScript, args)[0] == 0
        assert out.read_bytes() == first

    def test_several_methods(self, tmp_path):
        out = tmp_path / "phi.csv"
        args = [
            "--game", GLOVE3, "--method", "perm", "--method", "gt", "--epsilon", "0.5",
            "--budget", "100", "--seed", "3", "--out", str(out),
        ]
        assert run(EstimateScript, args)[0] == 0
        assert not out.exists()
        for method in ("permutation", "gt_original"):
            assert (tmp_path / f"phi.{method}.csv").exists()
            metadata = json.loads((tmp_path / f"phi.{method}.csv.meta.json").read_text())
            assert metadata["T"] == 100
            assert metadata["seed"] == 3

    def test_cache_reuse(self, tmp_path):
        out, cache = tmp_path / "phi.csv", tmp_path / "glove.cache"
        args = [
            "--game", GLOVE3, "--method", "gt-improved", "--budget", "500", "--out", str(out), "--cache", str(cache)
        ]

        assert run(EstimateScript, args)[0] == 0
        first = json.loads((tmp_path / "phi.csv.meta.json").read_text())
        assert first["utility_evals"] > 0
        assert cache.exists()

        assert run(EstimateScript, args)[0] == 0
        second = json.loads((tmp_path / "phi.csv.meta.json").read_text())
        assert second["utility_evals"] == 0

    def test_needs_out(self):
        status, _, stderr = run(EstimateScript, ["--game", GLOVE3, "--method", "perm", "--budget", "5"])
        assert status == 4
        assert "--out" in stderr

    def test_needs_budget_or_bounds(self, tmp_path):
        args = ["--game", GLOVE3, "--method", "perm", "--out", str(tmp_path / "x.csv")]
        status, _, stderr = run(EstimateScript, args)
        assert status == 2
        assert "epsilon and delta" in stderr

    def test_gt_needs_epsilon(self, tmp_path):
        args = ["--game", GLOVE3, "--method", "gt", "--budget", "10", "--out", str(tmp_path / "x.csv")]
        status, _, stderr = run(EstimateScript, args)
        assert status == 2
        assert "epsilon" in stderr

    def test_needs_game(self, tmp_path):
        status, _, stderr = run(EstimateScript, ["--method", "perm", "--budget", "5", "--out", str(tmp_path / "x.csv")])
        assert status == 4
        assert "--game" in stderr

    @pytest.mark.parametrize("script_class", [EstimateScript, CoverageScript])
    def test_zero_budget_rejected(self, tmp_path, script_class):
        """
        GIVEN: --budget 0 on the command line
        WHEN:  estimate or coverage runs
        THEN:  The budget is rejected instead of falling back to the bound-derived one
        """
        args = [
            "--game", GLOVE3, "--method", "perm", "--epsilon", "0.5", "--delta", "0.1",
            "--budget", "0", "--out", str(tmp_path / "x.csv"),
        ]
        status, _, stderr = run(script_class, args)
        assert status == 2
        assert "Budgets must be at least 1" in stderr
        assert not (tmp_path / "x.csv").exists()


class TestBoundScript:
    def test_permutations(self):
        status, stdout, _ = run(BoundScript, ["--n", "8", "--epsilon", "0.5", "--delta", "0.1", "--variant", "perm"])
        assert status == 0
        assert stdout.splitlines() == [
            "variant,n,epsilon,delta,T,utility_evals,Z,q_tot",
            "permutation,8,0.5,0.1,325,2925,,",
        ]

    def test_group_testing(self):
        status, stdout, _ = run(
            BoundScript, ["--n", "8", "--epsilon", "0.5", "--delta", "0.1", "--variant", "gt-improved"]
        )
        assert status == 0
        fields = stdout.splitlines()[1].split(",")
        assert fields[0] == GT_IMPROVED
        assert int(fields[4]) == int(fields[5]) == required_T(BoundQuery(8, 0.5, 0.1, GT_IMPROVED)).T
        assert float(fields[6]) * (1 - float(fields[7])) == pytest.approx(2.0, abs=1e-9)

    def test_invalid_query(self):
        status, _, stderr = run(BoundScript, ["--n", "1", "--epsilon", "0.5", "--delta", "0.1", "--variant", "gt"])
        assert status == 2
        assert "at least 2 players" in stderr


class TestDiagnoseScript:
    def test_analytic(self):
        status, stdout, _ = run(DiagnoseScript, ["--n", "8"])
        assert status == 0
        header, row = stdout.splitlines()
        assert header == "n,variant,Z,q_tot,effective_fraction,two_over_Z"
        fields = row.split(",")
        assert fields[:2] == ["8", "original"]
        assert float(fields[4]) == pytest.approx(float(fields[5]), abs=1e-12)

    def test_empirical(self, tmp_path):
        out = tmp_path / "diag.csv"
        args = ["--n", "6", "--variant", "augmented", "--empirical", "20000", "--seed", "4", "--out", str(out)]
        assert run(DiagnoseScript, args) == (0, "", "")
        header, row = out.read_text().splitlines()
        assert header.endswith(",empirical_fraction")
        fields = row.split(",")
        assert float(fields[6]) == pytest.approx(float(fields[5]), abs=0.02)


class TestCoverageScript:
    def test_from_config_file(self, tmp_path):
        """
        GIVEN: An experiment file with two methods, a budget of 200 and three trials
        WHEN:  The coverage script runs
        THEN:  Six trial rows go to the CSV, a two-row summary goes to stdout, and reruns match
        """
        out = tmp_path / "trials.csv"
        status, stdout, _ = run(CoverageScript, ["--config", EXPERIMENT, "--out", str(out)])
        assert status == 0

        lines = out.read_text().splitlines()
        assert lines[0] == "method,trial_index,T,l2_error,linf_error,utility_evals,residual,seed"
        assert len(lines) == 1 + 6

        summary = stdout.splitlines()
        assert summary[0] == "method,T,n_trials,covered,coverage,target"
        assert [line.split(",")[:3] for line in summary[1:]] == [
            ["gt_improved", "200", "3"], ["permutation", "200", "3"]
        ]

        first = out.read_bytes()
        assert run(CoverageScript, ["--config", EXPERIMENT, "--out", str(out)])[1] == stdout
        assert out.read_bytes() == first

    def test_flags_override_config(self, tmp_path):
        out = tmp_path / "trials.csv"
        status, stdout, _ = run(
            CoverageScript, ["--config", EXPERIMENT, "--method", "perm", "--trials", "2", "--out", str(out)]
        )
        assert status == 0
        assert len(stdout.splitlines()) == 2
        assert len(out.read_text().splitlines()) == 1 + 2

    def test_check_fails_below_target(self, tmp_path):
        args = [
            "--game", GLOVE3, "--method", "gt-improved", "--epsilon", "0.01", "--delta", "0.1",
            "--budget", "1", "--trials", "3", "--out", str(tmp_path / "trials.csv"),
        ]
        assert run(CoverageScript, args)[0] == 0

        status, stdout, stderr = run(CoverageScript, args + ["--check"])
        assert status == 7
        assert "gt_improved covered" in stderr
        assert stdout.startswith("method,T,n_trials")

    def test_output_dir(self, tmp_path):
        (tmp_path / "glove.game").write_text((TEST_DATA_DIR / "glove3.game").read_text())
        config = tmp_path / "run.experiment"
        config.write_text(
            "game = glove.game\nmethods = perm\nbudgets = 10\nepsilon = 0.5\ndelta = 0.1\noutput_dir = results\n"
        )
        assert run(CoverageScript, ["--config", str(config)])[0] == 0
        assert (tmp_path / "results" / "trials.csv").exists()

    def test_needs_epsilon_and_delta(self, tmp_path):
        args = ["--game", GLOVE3, "--method", "perm", "--budget", "5", "--out", str(tmp_path / "t.csv")]
        status, _, stderr = run(CoverageScript, args)
        assert status == 4
        assert "epsilon and delta" in stderr


class TestBenchScript:
    def test_bench(self, tmp_path):
        trials = tmp_path / "trials.csv"
        args = [
            "--game", GLOVE3, "--method", "perm", "--method", "gt-improved", "--budgets", "10,40",
            "--trials", "2", "--trials-out", str(trials),
        ]
        status, stdout, _ = run(BenchScript, args)
        assert status == 0

        lines = stdout.splitlines()
        assert lines[0] == "method,T,utility_evals,mean_l2,std_l2"
        assert [line.split(",")[:3] for line in lines[1:]] == [
            ["gt_improved", "10", "10"],
            ["gt_improved", "40", "40"],
            ["permutation", "10", "40"],
            ["permutation", "40", "160"],
        ]
        assert len(trials.read_text().splitlines()) == 1 + 8

    def test_needs_budgets(self):
        status, _, stderr = run(BenchScript, ["--game", GLOVE3, "--method", "perm"])
        assert status == 2
        assert "budget" in stderr


class TestScript:
    def test_unexpected_errors_propagate(self):
        class Broken(Script):
            name = "broken"

            def do_run(self, parsed, stdout):
                raise RuntimeError("wires crossed")

        with pytest.raises(RuntimeError):
            Broken().run([], StringIO(), StringIO())

    def test_settings_apply_only_during_the_run(self):
        seen = {}

        class Peek(Script):
            name = "peek"

            def do_run(self, parsed, stdout):
                from shapley_estimation.config import Configuration
                seen["n_jobs"] = Configuration.n_jobs()

        assert Peek().run(["--setting", "SHAPLEY_N_JOBS=3"], StringIO(), StringIO()) == 0
        assert seen["n_jobs"] == 3

    def test_problem_document_logged_with_cause(self, caplog):
        """
        GIVEN: A script failing with a configuration error raised from a ValueError
        WHEN:  It runs
        THEN:  Standard error gets the one-line message and the DEBUG log gets the problem
               document, whose debug_message names the ValueError
        """
        class Unreadable(Script):
            name = "unreadable"

            def do_run(self, parsed, stdout):
                try:
                    int("seven")
                except ValueError as e:
                    raise CannotLoadConfiguration("budgets: not a number") from e

        stderr = StringIO()
        with caplog.at_level(logging.DEBUG, logger="unreadable"):
            assert Unreadable().run([], StringIO(), stderr) == 4

        assert stderr.getvalue() == "Invalid definition file: budgets: not a number\n"
        [record] = [r for r in caplog.records if r.name == "unreadable"]
        document = json.loads(record.getMessage().split(": ", 1)[1])
        assert document["exit_status"] == 4
        assert document["detail"] == "budgets: not a number"
        assert "ValueError" in document["debug_message"]

    def test_problem_without_cause_has_no_debug_message(self):
        problem = Script.problem_for(InvalidParameter("epsilon must be positive"))
        assert problem.exit_status == 2
        assert problem.debug_message is None
        assert "debug_message" not in json.loads(problem.document)


class TestMain:
    def test_usage(self):
        stderr = StringIO()
        assert main([], StringIO(), stderr) == 2
        assert "usage: shapley" in stderr.getvalue()
        assert main(["frobnicate"], StringIO(), StringIO()) == 2

    def test_dispatch(self, monkeypatch):
        monkeypatch.setattr(LogConfiguration, "initialize", classmethod(lambda cls, testing=False: None))
        stdout = StringIO()
        assert main(["exact", "--game", GLOVE3], stdout, StringIO()) == 0
        assert stdout.getvalue().startswith("player,phi\n")

    def test_logging_sees_setting_overrides(self, monkeypatch):
        """
        GIVEN: --setting SHAPLEY_LOG_LEVEL=DEBUG
        WHEN:  main dispatches a subcommand
        THEN:  Logging is initialized while the override is in force
        """
        seen = []
        monkeypatch.setattr(
            LogConfiguration, "initialize",
            classmethod(lambda cls, testing=False: seen.append(Configuration.get(Configuration.LOG_LEVEL)))
        )
        args = ["exact", "--game", GLOVE3, "--setting", "SHAPLEY_LOG_LEVEL=DEBUG"]
        assert main(args, StringIO(), StringIO()) == 0
        assert seen == ["DEBUG"]

    def test_bad_log_setting_is_a_configuration_error(self):
        stderr = StringIO()
        args = ["exact", "--game", GLOVE3, "--setting", "SHAPLEY_LOG_LEVEL=LOUD"]
        assert main(args, StringIO(), stderr) == 4
        assert "SHAPLEY_LOG_LEVEL" in stderr.getvalue()

    def test_every_subcommand_registered(self):
        assert sorted(SCRIPTS) == ["bench", "bound", "coverage", "diagnose", "estimate", "exact"]
