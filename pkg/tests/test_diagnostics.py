"""
Тесты диагностики: подгонка порядка, ошибка предела, функционалы энергии и проверка остатка Theta.
"""

import numpy as np
import pytest

from kinetic_limit_py.core.collision import nu_weight
from kinetic_limit_py.core.grids import SpatialGrid
from kinetic_limit_py.core.maxwellian import FluidMoments
from kinetic_limit_py.errors import PreconditionError
from kinetic_limit_py.harness.diagnostics import (energy_functionals, fit_rate, limit_error, perturbation_from,
                                                  theta_residual_check, velocity_multi_indices)
from kinetic_limit_py.harness.sweep import prepare_well_prepared
from kinetic_limit_py.solvers.kinetic_solver import run_kinetic


class TestFitRate:

    def test_recovers_slope(self):
        pairs = [(eps, 3.0 * eps) for eps in (0.2, 0.1, 0.05, 0.025)]
        fit = fit_rate(pairs)
        assert fit.slope == pytest.approx(1.0, abs=1e-12)
        assert fit.intercept == pytest.approx(np.log(3.0), abs=1e-12)
        assert fit.r2 == pytest.approx(1.0)
        assert fit.rejected == ()

    def test_rejects_nonpositive_errors(self):
        pairs = [(0.2, 0.04), (0.1, 0.0), (0.05, 0.0025), (0.025, 0.000625)]
        fit = fit_rate(pairs)
        assert fit.slope == pytest.approx(2.0, abs=1e-12)
        assert fit.rejected == ((0.1, 0.0),)

    def test_needs_three_pairs(self):
        with pytest.raises(PreconditionError):
            fit_rate([(0.2, 0.1), (0.1, 0.05), (0.05, float("nan"))])


def test_velocity_multi_indices():
    assert len(velocity_multi_indices(1)) == 3
    second = velocity_multi_indices(2)
    assert len(second) == 6
    assert all(sum(beta) == 2 for beta in second)


def test_limit_error_vanishes_on_well_prepared_data(small_config, vgrid8):
    kinetic, fluid = prepare_well_prepared(small_config)
    error = limit_error(kinetic, fluid, vgrid8, small_config.spatial_grid())
    assert error.l2 == pytest.approx(0.0, abs=1e-14)
    assert error.linf_x == pytest.approx(0.0, abs=1e-14)
    assert error.field_l2 == 0.0
    assert error.field_linf == 0.0


def test_perturbation_grid_mismatch(small_config, fast8):
    kinetic, fluid = prepare_well_prepared(small_config)
    with pytest.raises(PreconditionError):
        perturbation_from(kinetic, fluid, 0.1, fast8, SpatialGrid(16, 1.0))


def test_initial_energy_scales_like_eps_squared(small_config, fast8):
    """Для хорошо подготовленных данных E_N(0) ~ eta0^2 eps^2: G = 0, f = -G_bar/sqrt(mu)."""
    config = small_config.replace(l_x=2 * np.pi)
    sgrid = config.spatial_grid()
    nu = nu_weight(fast8, FluidMoments.constant()).values
    ratios = []
    for eps in (0.2, 0.1, 0.05):
        run = config.replace(eps=eps)
        kinetic, fluid = prepare_well_prepared(run)
        p = perturbation_from(kinetic, fluid, eps, fast8, sgrid)
        np.testing.assert_allclose(p.all_components(), 0.0, atol=1e-12)
        energy = energy_functionals(p, run, nu, fast8.vgrid, sgrid)
        assert energy.e_n > 0
        assert energy.d_n > 0
        assert ("E", "f", 0, 1) in energy.breakdown
        ratios.append(energy.e_n / (run.eta0 ** 2 * eps ** 2))
    assert max(ratios) / min(ratios) <= 2.0


class TestThetaResidual:

    def test_window_must_have_three_snapshots(self, small_config, fast8):
        kinetic, _ = prepare_well_prepared(small_config)
        with pytest.raises(PreconditionError):
            theta_residual_check([kinetic, kinetic], 0.1, fast8, small_config.spatial_grid())

    def test_window_must_be_equidistant(self, small_config, fast8):
        kinetic, _ = prepare_well_prepared(small_config)
        shifted = [kinetic, type(kinetic)(kinetic.F, kinetic.em, 0.01), type(kinetic)(kinetic.F, kinetic.em, 0.03)]
        with pytest.raises(PreconditionError):
            theta_residual_check(shifted, 0.1, fast8, small_config.spatial_grid())

    @pytest.mark.slow
    def test_residual_is_finite(self, small_config, fast8):
        config = small_config.replace(t_end=1e-2)
        kinetic, _ = prepare_well_prepared(config)
        trajectory = run_kinetic(config, kinetic, kernel=fast8)
        assert len(trajectory.snapshots) == 3
        residual = theta_residual_check(trajectory.snapshots, config.eps, fast8, config.spatial_grid())
        assert np.isfinite(residual)
        assert residual >= 0.0
