"""
Тесты оркестрации: план сканирования, хорошо подготовленные данные, сравнение,
подгонка порядка и отчеты при прерванном запуске.
"""

import numpy as np
import pytest

from kinetic_limit_py.errors import BlowUpError, PreconditionError
from kinetic_limit_py.harness import sweep
from kinetic_limit_py.harness.reports import read_csv
from kinetic_limit_py.harness.sweep import (SweepPlan, compare, prepare_well_prepared, scaling_audit,
                                            snapshot_errors, sweep_eps, t_max_reference, write_sweep_reports)
from kinetic_limit_py.solvers.em_fields import gauss_residual
from kinetic_limit_py.solvers.fluid_solver import FluidTrajectory, theta_of_rho
from kinetic_limit_py.solvers.kinetic_solver import KineticTrajectory


class TestSweepPlan:

    def test_from_config(self, small_config):
        plan = SweepPlan.from_config(small_config, [0.2, 0.1, 0.05], parallel_runs=2)
        assert plan.eps_list == (0.2, 0.1, 0.05)
        assert plan.a_exp == small_config.a_exp
        assert plan.seed == small_config.seed

    @pytest.mark.parametrize("eps_list", [[0.2, 0.1], [0.2, 0.1, 0.1], [0.1, 0.2, 0.05], [0.2, 0.1, 0.0]])
    def test_invalid_lists(self, small_config, eps_list):
        with pytest.raises(PreconditionError):
            SweepPlan.from_config(small_config, eps_list)

    def test_invalid_parallelism(self, small_config):
        with pytest.raises(PreconditionError):
            SweepPlan.from_config(small_config, [0.2, 0.1, 0.05], parallel_runs=0)


def test_reference_horizon():
    assert t_max_reference(0.25, 0.0, 0.0) == pytest.approx(0.5)
    assert t_max_reference(0.25, 1.0, 0.0) == pytest.approx(1.0 / 6.0)
    assert t_max_reference(0.01, 0.01, 0.25) < t_max_reference(0.01, 0.01, 0.0)


def test_well_prepared_data(small_config):
    kinetic, fluid = prepare_well_prepared(small_config)
    vgrid, sgrid = small_config.velocity_grid(), small_config.spatial_grid()
    assert kinetic.F.shape == (8, 8, 8, 8)
    assert np.min(kinetic.F) > 0
    np.testing.assert_allclose(fluid.theta, theta_of_rho(fluid.rho))
    np.testing.assert_allclose(fluid.u, 0.0)
    assert max(gauss_residual(sgrid, kinetic.em, vgrid.integrate_v(kinetic.F))) <= 1e-12
    assert fluid.rho.max() - 1.0 == pytest.approx(small_config.eta0)


def test_compare_at_initial_time(small_config):
    kinetic, fluid = prepare_well_prepared(small_config)
    rows = compare(KineticTrajectory([kinetic]), FluidTrajectory([fluid]), small_config)
    assert len(rows) == 1
    assert rows[0]["t"] == 0.0
    assert rows[0]["limit_l2"] == pytest.approx(0.0, abs=1e-14)


def test_missing_fluid_snapshot(small_config):
    kinetic, fluid = prepare_well_prepared(small_config)
    later = type(kinetic)(kinetic.F, kinetic.em, 0.3)
    with pytest.raises(PreconditionError):
        snapshot_errors(later, FluidTrajectory([fluid]), small_config)


def test_scaling_audit():
    records = [{"t": 0.0, "e_n": 1e-4, "d_n": 0.0}, {"t": 1.0, "e_n": 1e-4, "d_n": 2e-4}]
    # sup (E_N + D/2) = 1e-4 + 0.5 * 1e-4 при eps = 0.1, a = 0
    assert scaling_audit(records, 0.1, 0.0) == pytest.approx(1.5e-4 / (0.5 * 0.01))
    assert np.isnan(scaling_audit([{"t": 0.0}], 0.1, 0.0))


def fake_run_kinetic(config, init, kernel=None, observer=None, progress=False):
    """Траектория с ошибками, пропорциональными eps; наименьшее eps прерывается."""
    eps = config.eps
    trajectory = KineticTrajectory()
    for t in (0.0, 0.01):
        record = {key: (1.0 + t) * eps for key in sweep.RATE_NORMS}
        record.update(t=t, micro_norm=eps)
        trajectory.records.append(record)
    if eps < 0.06:
        error = BlowUpError("norm blow-up")
        error.trajectory = trajectory
        raise error
    return trajectory


@pytest.mark.parametrize("parallel_runs", [1, 2])
def test_sweep_with_aborted_run(monkeypatch, tmp_path, small_config, fast8, parallel_runs):
    monkeypatch.setattr(sweep, "run_kinetic", fake_run_kinetic)
    plan = SweepPlan.from_config(small_config, [0.4, 0.2, 0.1, 0.05], parallel_runs=parallel_runs)
    report = sweep_eps(plan, kernel=fast8)

    assert not report.complete
    assert report.metadata["complete"] is False
    assert [run.status for run in report.runs] == ["ok", "ok", "ok", "aborted: BlowUpError"]
    assert report.fits["limit_l2"].slope == pytest.approx(1.0, abs=1e-12)
    assert report.fits["micro_norm"].slope == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(report.halving_ratios, 0.5)
    assert report.target == 1.0

    write_sweep_reports(report, str(tmp_path))
    table = read_csv(str(tmp_path / "sweep.csv"))
    assert table["metadata"]["complete"] == "false"
    assert table["metadata"]["t_max_label"] == sweep.T_MAX_LABEL
    assert [row["status"] for row in table["rows"]][-1] == "aborted: BlowUpError"
    summary = read_csv(str(tmp_path / "sweep_summary.csv"))
    assert {row["norm"] for row in summary["rows"]} == set(sweep.RATE_NORMS) | {"micro_norm"}
    assert (tmp_path / "timeseries_eps0.05.csv").exists()


def test_compare_with_energy(small_config, fast8):
    kinetic, fluid = prepare_well_prepared(small_config)
    rows = compare(KineticTrajectory([kinetic]), FluidTrajectory([fluid]), small_config, kernel=fast8)
    assert rows[0]["e_n"] >= 0.0 and rows[0]["d_n"] >= 0.0
    assert "theta_residual" not in rows[0]
