import sys
import argparse
import os
import csv
import json
import re
import pytest

# Add backend to sys.path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import cli
import experiments
import models

SCIENTIFIC = re.compile(r"^-?\d\.\d{15}e[+-]\d{2,3}$")

@pytest.fixture
def write_config(tmp_path):
    """Fixture that writes a JSON experiment file and returns its path."""
    def write(payload, name="experiment.json"):
        path = tmp_path / name
        path.write_text(payload if isinstance(payload, str) else json.dumps(payload), encoding="utf-8")
        return str(path)
    return write

def read_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))

def test_spectrum_command_writes_one_file_per_rule(tmp_path):
    """Test the spectrum command on a small mesh."""
    out = tmp_path / "out"
    assert cli.main(["spectrum", "--n", "10", "--out", str(out)]) == 0
    for label in ("G3", "O2"):
        rows = read_rows(out / f"spectrum_{label}.csv")
        assert rows[0] == list(experiments.SPECTRUM_HEADER)
        assert len(rows) == 1 + 10
        assert rows[1][0] == "0"
        assert rows[2][0] == "1"
        assert all(SCIENTIFIC.match(cell) for cell in rows[1][1:])

def test_output_is_deterministic(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert cli.main(["convergence", "--p", "1", "--out", str(first)]) == 0
    assert cli.main(["convergence", "--p", "1", "--out", str(second)]) == 0
    for name in ("convergence.csv", "convergence_slopes.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes()

def test_convergence_command_reports_slopes(tmp_path, write_config):
    path = write_config({"meshes": [16, 32, 64], "modes": [1]})
    assert cli.main(["convergence", "--config", path, "--out", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "convergence_slopes.json").read_text())
    slopes = {r["rule"]: r["fitted_slope"] for r in payload["reports"]}
    assert slopes["G3"] == pytest.approx(4.0, abs=0.2)
    assert slopes["O2"] == pytest.approx(6.0, abs=0.35)
    rows = read_rows(tmp_path / "convergence.csv")
    assert rows[0] == ["h", "mode", "rule", "relative_error"]
    assert len(rows) == 1 + 3 * 2

def test_dispersion_command(tmp_path):
    assert cli.main(["dispersion", "--rule", "blend", "--tau", "0.5", "--out", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "dispersion.json").read_text())
    quartic = [e for e in payload["estimates"] if e["exponent"] == 4][0]
    assert quartic["rule"] == "Q(G3,L3;tau=0.5)"
    assert quartic["coefficient"] == pytest.approx(0.5 / 1440, rel=1e-3)
    assert payload["sweep"] is None

def test_grid3d_command(tmp_path):
    assert cli.main(["grid3d", "--n", "3", "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "grid3d_G3.csv")
    assert rows[0] == list(experiments.GRID3D_HEADER)
    assert rows[1][:3] == ["1", "1", "1"]
    assert len(rows) == 1 + 27

def test_invalid_json_reports_position(write_config, capsys):
    path = write_config('{"degree": 2,\n "meshes": [4,]}')
    assert cli.main(["spectrum", "--config", path]) == cli.EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err

def test_invalid_field_reports_path(write_config, capsys):
    path = write_config({"rules": [{"kind": "blend"}]})
    assert cli.main(["spectrum", "--config", path]) == cli.EXIT_CONFIG
    assert "rules.0" in capsys.readouterr().err

@pytest.mark.parametrize("argv", [
    ["spectrum", "--p", "7"],
    ["schrodinger", "--bc", "neumann"],
    ["grid3d", "--bc", "neumann"],
    ["spectrum", "--config", "/nonexistent/experiment.json"],
])
def test_config_errors_exit_2(argv):
    assert cli.main(argv) == cli.EXIT_CONFIG

def test_bc_flag_switches_spectrum_to_dirichlet(tmp_path):
    assert cli.main(["spectrum", "--n", "10", "--bc", "dirichlet", "--rule", "gauss", "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "spectrum_G3.csv")
    assert len(rows) == 1 + 10
    assert rows[1][0] == "1"

def test_quadrature_failure_exit_3(tmp_path, mocker):
    mocker.patch.object(cli.config, "NEWTON_MAX_ITER", 0)
    assert cli.main(["spectrum", "--n", "8", "--out", str(tmp_path)]) == cli.EXIT_NUMERICAL

def test_top_level_must_be_object(write_config):
    assert cli.main(["spectrum", "--config", write_config("[1, 2]")]) == cli.EXIT_CONFIG

def test_singular_coefficient_exit_3_with_hint(tmp_path, write_config, capsys):
    """Test that Lobatto nodes on the Pöschl-Teller singularity fail with a hint."""
    path = write_config({"problem": "schrodinger_poschl_teller", "meshes": [8], "modes": [1]})
    code = cli.main(["convergence", "--config", path, "--rule", "lobatto", "--out", str(tmp_path)])
    assert code == cli.EXIT_NUMERICAL
    assert "gauss_blend" in capsys.readouterr().err

def test_nan_fails_the_command(tmp_path, mocker):
    mocker.patch.object(
        experiments.ExperimentRunner, "spectrum",
        return_value={"G3": [(1, 1.0, 1.0, float("nan"), float("nan"))]},
    )
    assert cli.main(["spectrum", "--out", str(tmp_path)]) == cli.EXIT_NUMERICAL

def test_failed_check_exit_4(tmp_path, mocker, capsys):
    mocker.patch.object(
        experiments.ExperimentRunner, "checks",
        return_value=[models.CheckResult(name="slope", passed=False, detail="too flat")],
    )
    assert cli.main(["spectrum", "--n", "8", "--check", "--out", str(tmp_path)]) == cli.EXIT_CHECK
    assert "FAIL slope: too flat" in capsys.readouterr().out

def test_passed_checks_exit_0(tmp_path, mocker, capsys):
    mocker.patch.object(
        experiments.ExperimentRunner, "checks",
        return_value=[models.CheckResult(name="slope", passed=True, detail="ok")],
    )
    assert cli.main(["spectrum", "--n", "8", "--check", "--out", str(tmp_path)]) == cli.EXIT_OK
    assert "PASS slope" in capsys.readouterr().out

def test_command_defaults_and_overrides():
    """Test per-command defaults and flag overrides."""
    parser = cli.build_parser()
    experiment = cli.load_experiment("schrodinger", parser.parse_args(["schrodinger"]))
    assert experiment.problem == "schrodinger_poschl_teller"
    assert experiment.modes == [1, 2, 4]

    experiment = cli.load_experiment("dispersion", parser.parse_args(["dispersion", "--tau", "0.3"]))
    assert [(r.kind, r.tau) for r in experiment.rules] == [("gauss", None), ("optimal", None), ("blend", 0.3)]

    args = parser.parse_args(["convergence", "--rule", "gauss_blend", "--tau", "1.5", "--p", "3", "--n", "12"])
    experiment = cli.load_experiment("convergence", args)
    assert [(r.kind, r.tau) for r in experiment.rules] == [("gauss_blend", 1.5)]
    assert experiment.degree == 3
    assert experiment.meshes == [12]

def test_output_dir_from_environment_config(mocker):
    mocker.patch.object(cli.config, "OUTPUT_DIR", "/tmp/iga-results")
    experiment = cli.load_experiment("spectrum", cli.build_parser().parse_args(["spectrum"]))
    assert experiment.output == "/tmp/iga-results"

def test_unknown_command_rejected():
    with pytest.raises(SystemExit):
        cli.main(["plot"])

def test_every_subcommand_has_a_handler():
    parser = cli.build_parser()
    subcommands = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    assert set(subcommands.choices) == set(cli.COMMANDS)

def test_run_command_rejects_unknown_name(tmp_path):
    experiment = cli.load_experiment("spectrum", cli.build_parser().parse_args(["spectrum", "--out", str(tmp_path)]))
    with pytest.raises(ValueError):
        cli.run_command("plot", experiment)
