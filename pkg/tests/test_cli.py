"""Test the command-line front end."""

import json
import os
from unittest.mock import patch

import pytest

from arbcost_pricing import cli
from arbcost_pricing.cli import build_parser, load_scenario, run
from arbcost_pricing.errors import ValidationError
from arbcost_pricing.serialization import validate_result


@pytest.fixture(autouse=True)
def isolated_env(clean_env):
    """Every CLI test starts from default settings."""
    yield clean_env


def _run_json(capsys, *argv):
    code = run(list(argv))
    captured = capsys.readouterr()
    assert code == 0, captured.err
    return json.loads(captured.out)


def _run_error(capsys, *argv):
    code = run(list(argv))
    return code, capsys.readouterr().err


def _scenario(tmp_path, **data):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(data))
    return str(path)


class TestDocuments:
    """Every command emits one schema-valid document."""

    def test_closed_price(self, capsys):
        document = _run_json(capsys, "closed-price", "--rate", "0.05")
        assert document["schema_version"] == "1.0"
        assert document["command"] == "closed-price"
        assert document["result"]["price"] == pytest.approx(10.4506, abs=1e-4)
        assert document["inputs"]["strike"] == 100.0
        assert document["seed"] is None
        validate_result(document)

    def test_closed_price_hetero(self, capsys):
        document = _run_json(capsys, "closed-price", "--model", "hetero")
        assert document["result"]["rate"] == pytest.approx(0.25)
        assert document["result"]["diagnostics"]["lambda1"] == pytest.approx(2.5)

    def test_rates_arb(self, capsys):
        document = _run_json(capsys, "rates", "--mu1", "0.04", "--mu2", "0.09")
        result = document["result"]
        assert result["r_star"] == pytest.approx(0.25)
        assert result["lambda1"] == pytest.approx(2.5)
        assert result["lambda2"] == pytest.approx(5.0 / 3.0)
        assert result["implied_rate"] == pytest.approx(0.25)

    def test_rates_black72(self, capsys):
        document = _run_json(
            capsys, "rates", "--mode", "black72", "--mu1", "0.03", "--sigma1", "0.1",
            "--mu2", "0.07", "--sigma2", "0.2",
        )
        assert document["result"]["rate"] == pytest.approx(-0.01)

    def test_rates_costed(self, capsys):
        document = _run_json(capsys, "rates", "--mode", "costed", "--mu1", "0.05", "--mu2", "0.08")
        result = document["result"]
        assert result["yield1"] - result["yield2"] == pytest.approx(-0.03)
        assert len(result["effective"]) == 2

    def test_alloc_default_views(self, capsys):
        document = _run_json(capsys, "alloc")
        result = document["result"]
        assert result["status"] == "ok"
        assert len(result["allocations"]) == 2
        for a1, a2 in result["allocations"]:
            assert a1 + a2 == pytest.approx(1.0)

    def test_alloc_no_real_root(self, capsys):
        document = _run_json(capsys, "alloc", "--cy1", "0.01", "--cy2", "0.02")
        assert document["result"]["status"] == "no_real_root"
        assert document["result"]["roots"] == []

    def test_alloc_nocost(self, capsys):
        document = _run_json(capsys, "alloc", "--mode", "nocost")
        assert document["result"]["roots"] == [0.0, 1.0]

    def test_tree_price(self, capsys):
        document = _run_json(capsys, "tree-price", "--steps", "100")
        result = document["result"]
        assert result["q"] == pytest.approx(0.49, abs=1e-12)
        assert result["reference_rate"] == pytest.approx(0.01)
        assert result["reference_error"] < 0.2
        assert result["risk_neutral_q"]["residual"] < 1e-12

    def test_tree_price_with_costs_has_no_reference(self, capsys):
        document = _run_json(capsys, "tree-price", "--steps", "100", "--cost", "0.1")
        assert "reference_price" not in document["result"]

    def test_pde_price(self, capsys):
        document = _run_json(
            capsys, "pde-price", "--rate", "0.05", "--n-space", "200", "--n-time", "200"
        )
        assert document["result"]["price"] == pytest.approx(10.4506, abs=1e-2)
        assert document["result"]["grid"]["n_space"] == 200

    def test_mc_price(self, capsys):
        document = _run_json(
            capsys, "mc-price", "--rate", "0.05", "--seed", "11", "--paths", "20000",
            "--steps", "5",
        )
        result = document["result"]
        assert abs(result["estimate"] - 10.4506) < 4.0 * result["std_error"]
        assert document["seed"] == 11

    def test_arb_demo(self, capsys):
        document = _run_json(
            capsys, "arb-demo", "--seed", "1", "--paths", "200", "--steps", "100"
        )
        result = document["result"]
        assert result["mean_pnl"] == pytest.approx(0.04, abs=1e-3)
        assert result["expected_pnl"] == pytest.approx(0.04)
        assert result["all_positive"] is True

    def test_hedge_demo(self, capsys):
        document = _run_json(
            capsys, "hedge-demo", "--seed", "2", "--paths", "200", "--steps", "50"
        )
        result = document["result"]
        assert result["rate"] == pytest.approx(0.25)
        assert result["rule"] == "exposure"
        assert result["error"]["paths"] == 200

    def test_converge_costed(self, capsys):
        document = _run_json(capsys, "converge", "--kind", "costed", "--seed", "0")
        result = document["result"]
        assert result["columns"][0] == "dt"
        assert len(result["rows"]) == 3
        residuals = [row[4] for row in result["rows"]]
        assert residuals[0] > residuals[1] > residuals[2]

    def test_converge_lattice(self, capsys):
        document = _run_json(
            capsys, "converge", "--kind", "lattice", "--levels", "250,500", "--seed", "0"
        )
        rows = document["result"]["rows"]
        assert [row[0] for row in rows] == [250, 500]
        assert all(row[3] < 0.05 for row in rows)

    def test_xcheck_agrees(self, capsys):
        code = run([
            "xcheck", "--seed", "3", "--paths", "20000", "--steps", "5",
            "--n-space", "200", "--n-time", "200", "--pde-rel-tol", "2e-3",
            "--mc-std-errors", "4",
        ])
        document = json.loads(capsys.readouterr().out)
        assert code == 0
        assert document["agree"] is True
        assert document["tolerances"]["mc_std_errors"] == 4.0
        assert document["result"]["rate"] == 0.05

    def test_xcheck_disagreement_exit_code(self, capsys):
        code = run([
            "xcheck", "--seed", "3", "--paths", "1000", "--steps", "2",
            "--n-space", "100", "--n-time", "100", "--mc-std-errors", "1e-9",
            "--pde-rel-tol", "1e-12",
        ])
        document = json.loads(capsys.readouterr().out)
        assert code == 1
        assert document["agree"] is False


class TestDeterminism:
    def test_thread_count_does_not_change_output(self, capsys):
        argv = ["mc-price", "--rate", "0.05", "--seed", "5", "--paths", "10000", "--steps", "3"]
        assert run(argv + ["--threads", "1"]) == 0
        serial = capsys.readouterr().out
        assert run(argv + ["--threads", "4"]) == 0
        threaded = capsys.readouterr().out
        assert serial == threaded

    def test_floats_carry_17_digits(self, capsys):
        run(["rates", "--mu1", "0.04", "--mu2", "0.09"])
        out = capsys.readouterr().out
        assert '"mu1": 0.040000000000000001' in out


class TestCsvOutput:
    def test_flattened_result(self, capsys):
        assert run(["rates", "--mu1", "0.04", "--mu2", "0.09", "--format", "csv"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "key,value"
        assert any(line.startswith("r_star,") for line in lines)

    def test_pde_grid_table(self, capsys):
        argv = ["pde-price", "--rate", "0.05", "--n-space", "50", "--n-time", "50"]
        assert run(argv + ["--format", "csv"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("t,")
        assert len(lines) == 52
        assert len(lines[0].split(",")) == 52


class TestErrors:
    """Exit codes and stderr messages."""

    def test_missing_subcommand(self, capsys):
        code, err = _run_error(capsys)
        assert code == 2
        assert err.startswith("UsageError:")

    def test_missing_required_option(self, capsys):
        code, err = _run_error(capsys, "rates")
        assert code == 2
        assert "--mu1" in err

    def test_bad_choice(self, capsys):
        code, err = _run_error(capsys, "closed-price", "--kind", "straddle")
        assert code == 2

    def test_seed_required_for_stochastic_commands(self, capsys):
        code, err = _run_error(capsys, "mc-price")
        assert code == 2
        assert "--seed" in err

    def test_seed_out_of_range(self, capsys):
        code, err = _run_error(capsys, "arb-demo", "--seed", str(2**64))
        assert code == 3
        assert err.startswith("ValidationError:")

    def test_pricing_error(self, capsys):
        code, err = _run_error(capsys, "rates", "--mu1", "0", "--mu2", "0.09")
        assert code == 4
        assert err.startswith("NonPositiveDrift:")

    def test_strict_allocation(self, capsys):
        code, err = _run_error(capsys, "alloc", "--cy1", "0.01", "--cy2", "0.02", "--strict")
        assert code == 4
        assert err.startswith("NoRealRoot:")

    def test_grid_too_coarse(self, capsys):
        code, err = _run_error(capsys, "pde-price", "--n-space", "2")
        assert code == 4
        assert err.startswith("GridTooCoarse:")

    def test_bad_levels(self, capsys):
        code, _ = _run_error(
            capsys, "converge", "--kind", "lattice", "--levels", "10.5", "--seed", "0"
        )
        assert code == 3

    def test_bad_environment(self, capsys, clean_env):
        clean_env.setenv("ARBCOST_THREADS", "zero")
        code, err = _run_error(capsys, "closed-price")
        assert code == 3

    def test_negative_vol_is_rejected_before_pricing(self, capsys):
        code, err = _run_error(capsys, "closed-price", "--vol", "-0.2")
        assert code == 3
        assert err.startswith("ValidationError:")
        assert "--vol must be positive" in err

    def test_non_positive_pde_rate(self, capsys):
        code, err = _run_error(
            capsys, "pde-price", "--rate", "0", "--n-space", "50", "--n-time", "50"
        )
        assert code == 4
        assert err.startswith("InvalidParameter:")
        assert "rate must be positive" in err

    def test_preconditions_report_every_violation(self):
        with pytest.raises(ValidationError) as excinfo:
            cli.check_preconditions({"vol": -1.0, "mix": 1.0, "mu": -5.0, "rate": None})
        message = str(excinfo.value)
        assert "--vol must be positive" in message
        assert "--mix must lie in [0, 1)" in message
        assert "--mu" not in message

    def test_lattice_step_too_coarse(self, capsys):
        code, err = _run_error(
            capsys, "tree-price", "--steps", "1", "--mu", "0.6", "--sigma", "0.6", "--m", "0"
        )
        assert code == 4
        assert err.startswith("QOutOfRange:")

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run(["--version"])
        assert excinfo.value.code == 0
        assert "arbcost" in capsys.readouterr().out


class TestScenario:
    """Scenario files and parameter precedence."""

    def test_scenario_values(self, capsys, tmp_path):
        path = _scenario(tmp_path, schema_version="1.0", command="closed-price", rate=0.05)
        document = _run_json(capsys, "closed-price", "--scenario", path)
        assert document["result"]["price"] == pytest.approx(10.4506, abs=1e-4)

    def test_flag_overrides_scenario(self, capsys, tmp_path):
        path = _scenario(tmp_path, schema_version="1.0", strike=120.0, rate=0.05)
        document = _run_json(capsys, "closed-price", "--scenario", path, "--strike", "100")
        assert document["inputs"]["strike"] == 100.0
        assert document["inputs"]["rate"] == 0.05

    def test_scenario_seed(self, capsys, tmp_path):
        path = _scenario(tmp_path, schema_version="1.0", seed=9, paths=100, steps=10)
        document = _run_json(capsys, "arb-demo", "--scenario", path)
        assert document["seed"] == 9

    @pytest.mark.parametrize(
        "data",
        [
            {"schema_version": "0.9"},
            {"schema_version": "1.0", "command": "rates"},
            {"schema_version": "1.0", "volatility": 0.3},
            {"schema_version": "1.0", "strike": "high"},
            {"schema_version": "1.0", "strike": True},
        ],
    )
    def test_invalid_scenarios(self, capsys, tmp_path, data):
        path = _scenario(tmp_path, **data)
        code, err = _run_error(capsys, "closed-price", "--scenario", path)
        assert code == 3
        assert err.startswith("ValidationError:")

    def test_unreadable_scenario(self, tmp_path):
        with pytest.raises(ValidationError):
            load_scenario(str(tmp_path / "missing.json"), "rates")


class TestStorage:
    """Results persisted under --output-dir."""

    def test_result_is_stored(self, capsys, tmp_path):
        out = tmp_path / "out"
        _run_json(capsys, "closed-price", "--output-dir", str(out))
        stored = json.loads((out / "closed-price.json").read_text())
        assert stored["key"] == "closed-price"
        assert stored["result"]["command"] == "closed-price"
        assert stored["metadata"] == {"format": "json"}

    def test_tables_are_stored(self, capsys, tmp_path):
        out = tmp_path / "out"
        _run_json(
            capsys, "pde-price", "--n-space", "20", "--n-time", "20", "--output-dir", str(out)
        )
        assert (out / "pde-price-grid.csv").exists()

    def test_path_tables_need_opt_in(self, capsys, tmp_path):
        out = tmp_path / "out"
        argv = [
            "arb-demo", "--seed", "1", "--paths", "50", "--steps", "10", "--output-dir", str(out),
        ]
        _run_json(capsys, *argv)
        assert (out / "arb-demo.json").exists()
        assert not (out / "arb-demo-paths.csv").exists()
        _run_json(capsys, *argv, "--paths-csv")
        assert (out / "arb-demo-paths.csv").exists()

    def test_output_dir_is_a_file(self, capsys, tmp_path):
        blocker = tmp_path / "taken"
        blocker.write_text("not a directory")
        code, err = _run_error(capsys, "closed-price", "--output-dir", str(blocker))
        assert code == 5
        assert err.startswith("StorageError:")

    def test_write_failure(self, capsys, tmp_path):
        with patch.object(cli.LocalFileResultStorage, "set", side_effect=OSError("disk full")):
            code, err = _run_error(capsys, "closed-price", "--output-dir", str(tmp_path))
        assert code == 5
        assert "disk full" in err

    def test_rerun_replaces_stored_result(self, capsys, tmp_path):
        out = tmp_path / "out"
        _run_json(capsys, "closed-price", "--output-dir", str(out))
        with patch.object(cli.logger, "info") as info:
            _run_json(capsys, "closed-price", "--strike", "110", "--output-dir", str(out))
        messages = [call.args[0] for call in info.call_args_list]
        assert any("Replacing closed-price result" in m and "other inputs" in m for m in messages)
        stored = json.loads((out / "closed-price.json").read_text())
        assert stored["result"]["inputs"]["strike"] == 110.0

    def test_stale_path_table_is_removed(self, capsys, tmp_path):
        out = tmp_path / "out"
        argv = [
            "arb-demo", "--seed", "1", "--paths", "50", "--steps", "10", "--output-dir", str(out),
        ]
        _run_json(capsys, *argv, "--paths-csv")
        assert (out / "arb-demo-paths.csv").exists()
        _run_json(capsys, *argv)
        assert not (out / "arb-demo-paths.csv").exists()
        assert (out / "arb-demo.json").exists()

    def test_output_dir_from_environment(self, capsys, tmp_path, clean_env):
        out = tmp_path / "env-out"
        clean_env.setenv("ARBCOST_OUTPUT_DIR", str(out))
        _run_json(capsys, "closed-price")
        assert os.path.exists(out / "closed-price.json")


def test_parser_has_every_command():
    parser = build_parser()
    for command in cli.COMMAND_PARAMS:
        args = parser.parse_args([command])
        assert args.command == command


def test_main_exits_with_run_code(capsys):
    with patch("sys.argv", ["arbcost", "closed-price"]):
        with pytest.raises(SystemExit) as excinfo:
            cli.main()
    assert excinfo.value.code == 0
