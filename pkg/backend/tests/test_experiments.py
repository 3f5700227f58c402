import sys
import os
import math
import pytest

# Add backend to sys.path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import analysis
import errors
import experiments
import models

def runner_for(**fields):
    return experiments.ExperimentRunner(models.ExperimentConfig(**fields))

def test_map_preserves_order():
    """Test that threaded mesh sweeps come back in input order."""
    runner = experiments.ExperimentRunner(models.ExperimentConfig(), max_workers=3)
    assert runner._map(lambda n: n * n, [5, 1, 3, 2]) == [25, 1, 9, 4]

def test_spectrum_tables():
    """Test one spectrum table per rule with N rows for N degrees of freedom."""
    tables = runner_for(meshes=[40]).spectrum()
    assert set(tables) == {"G3", "O2"}
    rows = tables["G3"]
    assert len(rows) == 40
    assert rows[0][:3] == (0, 0.0, 0.0)
    assert abs(rows[0][4]) < 1e-8
    assert rows[1][0] == 1
    assert rows[1][2] == pytest.approx(math.pi ** 2)
    assert rows[-1][1] == pytest.approx(39 / 40)
    assert all(math.isfinite(row[4]) for row in rows)

def test_dirichlet_spectrum_starts_at_first_mode():
    """Test that both conditions give N rows and only Neumann carries the zero mode."""
    neumann = runner_for(meshes=[20], rules=[{"kind": "gauss"}]).spectrum()["G3"]
    dirichlet = runner_for(meshes=[20], bc="dirichlet", rules=[{"kind": "gauss"}]).spectrum()["G3"]
    assert len(neumann) == len(dirichlet) == 20
    assert neumann[0][0] == 0 and dirichlet[0][0] == 1
    assert dirichlet[-1][1] == pytest.approx(1.0)

def test_shifted_neumann_spectrum_keeps_relative_error():
    rows = runner_for(meshes=[12], gamma=2.0, rules=[{"kind": "gauss"}]).spectrum()["G3"]
    assert rows[0][2] == 2.0
    assert rows[0][4] == pytest.approx(0.0, abs=1e-10)

def test_spectrum_branch_check():
    """Test that the optimal blend dominates Gauss on the resolved part of the spectrum."""
    runner = runner_for(meshes=[200])
    result = runner.check_spectrum_branch(runner.spectrum())
    assert result.passed, result.detail

def test_convergence_orders():
    """Test fourth-order Gauss and sixth-order optimal eigenvalue convergence in 1D."""
    runner = runner_for(meshes=[16, 32, 64], modes=[1, 2])
    study = runner.convergence()
    assert len(study.rows) == 2 * 3 * 2
    slopes = {(r.rule, r.mode): r.fitted_slope for r in study.reports}
    for mode in (1, 2):
        assert slopes[("G3", mode)] == pytest.approx(4.0, abs=0.2)
        assert slopes[("O2", mode)] == pytest.approx(6.0, abs=0.35)
    assert all(r.pre_asymptotic == [] for r in study.reports)
    checks = runner.check_convergence(study)
    assert [c.name for c in checks][-1] == "optimal_below_gauss"
    assert checks[-1].passed

def test_convergence_checks_on_full_sweep():
    """Test the slope checks for modes 2, 4 and 8 on meshes 16 to 128."""
    runner = runner_for(meshes=[16, 32, 64, 128], modes=[2, 4, 8])
    study = runner.convergence()
    by_key = {(r.rule, r.mode): r for r in study.reports}
    unresolved = by_key[("G3", 8)]
    assert unresolved.pre_asymptotic == pytest.approx([1 / 16])
    assert unresolved.fitted_slope > 4.1
    assert unresolved.asymptotic_slope == pytest.approx(4.0, abs=0.15)
    assert len(unresolved.pairwise_slopes) == 3
    checks = runner.check_convergence(study)
    assert len(checks) == 2 * 3 + 1
    failed = [(c.name, c.detail) for c in checks if not c.passed]
    assert not failed
    assert "pairwise" in checks[0].detail

def test_tensor_convergence_rows():
    runner = runner_for(problem="laplace_dirichlet_3d", meshes=[4, 8], modes=[1, 2])
    study = runner.convergence()
    h_values = sorted({row[0] for row in study.rows})
    assert h_values == pytest.approx([0.125, 0.25])
    assert all(row[3] > 0 for row in study.rows if row[2] == "G3")

def test_gauss_blend_tau_is_swept_once(mocker):
    """Test that the Gauss-Gauss τ comes from one cached sweep per degree."""
    sweep = mocker.patch.object(analysis, "tau_sweep", return_value=(1.5, None))
    runner = runner_for(rules=[{"kind": "gauss_blend"}])
    label, rule = runner.resolve_rule(runner.experiment.rules[0], 2)
    runner.resolve_rule(runner.experiment.rules[0], 2)
    assert sweep.call_count == 1
    assert sweep.call_args.kwargs["partner"] == "gauss"
    assert label == "Q(G3,G2;tau=1.5)"
    assert rule.tau == 1.5

def test_explicit_gauss_blend_tau_skips_sweep(mocker):
    sweep = mocker.patch.object(analysis, "tau_sweep")
    runner = runner_for(rules=[{"kind": "gauss_blend", "tau": 2.0}])
    runner.resolve_rule(runner.experiment.rules[0], 1)
    sweep.assert_not_called()

def test_schrodinger_table():
    """Test the Pöschl-Teller table against the published Gauss columns."""
    runner = runner_for(problem="schrodinger_poschl_teller", modes=[1, 2, 4])
    study = runner.schrodinger()
    assert study.taus[1] == pytest.approx(2.0, abs=0.02)
    assert study.taus[2] == pytest.approx(2.0, abs=0.02)

    labels = sorted({row[1] for row in study.rows if row[0] == 2 and row[1] != "rho"})
    assert labels == [10, 20, 40]
    quadratic = study.errors[(2, "G3", 1)]
    for ours, published in zip(quadratic[1:], experiments.TABLE_GAUSS_ERRORS[2][1][1:]):
        assert abs(ours) == pytest.approx(published, rel=0.02)
    assert abs(study.errors[(2, "G3", 4)][-1]) == pytest.approx(experiments.TABLE_GAUSS_ERRORS[2][4][-1], rel=0.02)
    linear = study.errors[(1, "G2", 1)]
    assert abs(linear[-1]) == pytest.approx(experiments.TABLE_GAUSS_ERRORS[1][1][-1], rel=0.1)

    for p in (1, 2):
        for mode in (1, 2, 4):
            gauss = study.errors[(p, f"G{p + 1}", mode)]
            blended = study.errors[(p, f"O{p}", mode)]
            assert all(abs(b) < abs(g) for b, g in zip(blended, gauss))
    rho_rows = [row for row in study.rows if row[1] == "rho"]
    assert len(rho_rows) == 2 * 2 * 3

def test_schrodinger_meshes_are_halved(mocker):
    """Test that a table label N = π/h runs on N/2 elements of the half period."""
    solve = mocker.spy(analysis, "solve_problem")
    runner = runner_for(problem="schrodinger_poschl_teller", modes=[1], table_meshes={2: [10, 20]},
                        rules=[{"kind": "gauss_blend", "tau": 2.0}])
    study = runner.schrodinger()
    assert sorted({call.args[2] for call in solve.call_args_list}) == [5, 10]
    assert [row[1] for row in study.rows if row[2] == "G3"] == [10, 20, "rho"]

def test_dispersion_study():
    runner = runner_for(rules=[{"kind": "gauss"}, {"kind": "optimal"}], sweep=True)
    result = runner.dispersion()
    by_key = {(e["rule"], e["exponent"]): e for e in result["estimates"]}
    assert set(by_key) == {("G3", 4), ("O2", 4), ("O2", 6)}
    assert by_key[("G3", 4)]["coefficient"] == pytest.approx(1 / 720, rel=1e-3)
    assert by_key[("O2", 6)]["coefficient"] == pytest.approx(11 / 60480, rel=0.02)
    assert result["sweep"]["tau_star"] == pytest.approx(1 / 3, abs=1e-3)

def test_dispersion_checks_pass():
    checks = runner_for().check_dispersion()
    assert len(checks) == 9
    failed = [(c.name, c.detail) for c in checks if not c.passed]
    assert not failed

def test_dispersion_needs_laplace_problem():
    with pytest.raises(errors.ConfigError):
        runner_for(problem="laplace_dirichlet_3d").dispersion()

def test_grid3d_single_element():
    """Test that one quadratic element leaves a single (1,1,1) entry."""
    tables = runner_for(problem="laplace_dirichlet_3d", meshes=[1]).grid3d()
    rows = tables["G3"]
    assert len(rows) == 1
    assert rows[0][:3] == (1, 1, 1)
    assert rows[0][3] == pytest.approx(3 * math.pi ** 2)

def test_grid3d_limits_and_domination():
    runner = runner_for(problem="laplace_dirichlet_3d", meshes=[6], grid_max=3)
    tables = runner.grid3d()
    assert len(tables["O2"]) == 27
    assert tables["O2"][1][:3] == (1, 1, 2)
    assert runner.check_grid_domination(tables).passed

def test_grid3d_needs_3d_problem():
    with pytest.raises(errors.ConfigError):
        runner_for().grid3d()

def test_kronecker_oracle_check():
    assert runner_for(problem="laplace_dirichlet_3d").check_kronecker_oracle().passed

def test_checks_dispatch(mocker):
    runner = runner_for()
    branch = mocker.patch.object(runner, "check_spectrum_branch", return_value="ok")
    assert runner.checks("spectrum", {"G3": []}) == ["ok"]
    branch.assert_called_once_with({"G3": []})
    with pytest.raises(ValueError):
        runner.checks("plot", None)
