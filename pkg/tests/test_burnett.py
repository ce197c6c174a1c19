"""
Тесты функций Барнетта, коэффициентов переноса, поправки G_bar и тождеств вязкости.
"""

import numpy as np
import pytest

from kinetic_limit_py.core.burnett import (TransportCache, burnett_hat, burnett_identity_report, burnett_solve,
                                           correction_gbar, transport_coeffs, viscous_identity_residual)
from kinetic_limit_py.core.grids import SpatialGrid
from kinetic_limit_py.core.linearized import LinearizedSolver
from kinetic_limit_py.core.maxwellian import FluidMoments
from kinetic_limit_py.harness.reports import transport_row

REST = FluidMoments.constant(1.0, (0.0, 0.0, 0.0), 1.5)


@pytest.fixture(scope="module")
def rest_table(fast12):
    return burnett_solve(fast12, REST)


def test_b_hat_is_traceless(vgrid12):
    _, b_hat = burnett_hat(FluidMoments.constant(1.0, (0.2, 0.0, 0.0), 1.3), vgrid12)
    np.testing.assert_allclose(np.trace(b_hat), 0.0, atol=1e-12)
    np.testing.assert_array_equal(b_hat[0, 1], b_hat[1, 0])


def test_burnett_solutions_are_micro(rest_table):
    assert rest_table.max_residual <= 1e-7
    assert rest_table.max_micro_defect <= 1e-6


def test_burnett_identities_at_rest(rest_table, vgrid12):
    """В покое симметрия куба дает пункты 1-7 с точностью решателя; изотропия - с точностью сетки."""
    entries = {entry.bullet: entry for entry in burnett_identity_report(rest_table, vgrid12)}
    assert sorted(entries) == list(range(1, 9))
    for bullet in range(1, 8):
        assert entries[bullet].passed, entries[bullet]
    assert entries[8].defect < 0.25


class TestTransportCoeffs:

    @pytest.fixture(scope="class")
    def rest(self, fast12):
        return transport_coeffs(fast12, REST)

    def test_positive(self, rest):
        assert rest.mu_theta > 0
        assert rest.kappa_theta > 0
        assert rest.mu_spread < 1e-5
        assert rest.kappa_spread < 1e-5
        assert rest.consistent

    def test_spread_is_reported(self, fast12, caplog):
        moving = FluidMoments.constant(1.0, (0.3, 0.0, 0.0), 1.5)
        with caplog.at_level("WARNING", logger="Burnett"):
            coeffs = transport_coeffs(fast12, moving, tol_identity=0.0)
        assert not coeffs.consistent
        assert coeffs.mu_spread > 0.0
        assert "расходятся" in caplog.text
        row = transport_row(moving, coeffs)
        assert row["consistent"] is False
        assert row["mu_spread"] == coeffs.mu_spread

    def test_independent_of_density(self, fast12, rest):
        dense = transport_coeffs(fast12, FluidMoments.constant(2.0, (0.0, 0.0, 0.0), 1.5))
        assert dense.mu_theta == pytest.approx(rest.mu_theta, rel=1e-6)
        assert dense.kappa_theta == pytest.approx(rest.kappa_theta, rel=1e-6)

    def test_nearly_independent_of_velocity(self, fast12, rest):
        moving = transport_coeffs(fast12, FluidMoments.constant(1.0, (0.1, 0.0, 0.0), 1.5))
        assert moving.mu_theta == pytest.approx(rest.mu_theta, rel=2e-2)
        assert moving.kappa_theta == pytest.approx(rest.kappa_theta, rel=2e-2)

    def test_cache_reuses_solutions(self, fast12, rest):
        cache = TransportCache(fast12)
        mu, kappa = cache.fields(np.full(3, 1.5))
        np.testing.assert_allclose(mu, rest.mu_theta, rtol=1e-12)
        np.testing.assert_allclose(kappa, rest.kappa_theta, rtol=1e-12)
        assert len(cache._cache) == 1


class TestCorrectionGbar:

    @pytest.fixture(scope="class")
    def setup(self):
        sgrid = SpatialGrid(4, 1.0)
        x = sgrid.nodes
        fluid = FluidMoments(np.ones(4), np.zeros((4, 3)), 1.5 + 0.1 * np.cos(2 * np.pi * x))
        u = np.stack([0.05 * np.sin(2 * np.pi * x), 0.02 * np.cos(2 * np.pi * x), np.zeros(4)], axis=-1)
        reference = FluidMoments(np.ones(4), u, fluid.theta)
        return sgrid, fluid, reference

    def test_direct_and_burnett_forms_agree(self, fast12, setup):
        sgrid, fluid, reference = setup
        direct = correction_gbar(fast12, sgrid, fluid, reference, eps=0.1)
        burnett = correction_gbar(fast12, sgrid, fluid, reference, eps=0.1, representation="burnett")
        assert np.linalg.norm(direct - burnett) <= 1e-5 * np.linalg.norm(direct)

    def test_linear_in_eps_and_micro(self, fast12, setup):
        sgrid, fluid, reference = setup
        small = correction_gbar(fast12, sgrid, fluid, reference, eps=0.05)
        large = correction_gbar(fast12, sgrid, fluid, reference, eps=0.1)
        np.testing.assert_allclose(large, 2.0 * small, rtol=1e-12, atol=0.0)
        for cell in range(sgrid.n_x):
            solver = LinearizedSolver(fast12, fluid.cell(cell))
            assert solver.micro_defect(large[cell]) < 1e-8

    def test_unknown_representation(self, fast12, setup):
        sgrid, fluid, reference = setup
        with pytest.raises(ValueError):
            correction_gbar(fast12, sgrid, fluid, reference, eps=0.1, representation="chapman")


@pytest.mark.slow
def test_viscous_identity_for_shear(fast12):
    """Сдвиговое течение u = (0, delta sin 2 pi x, 0): вязкое напряжение и тепловой поток."""
    sgrid = SpatialGrid(8, 1.0)
    delta = 1e-3
    u = np.stack([np.zeros(8), delta * np.sin(2 * np.pi * sgrid.nodes), np.zeros(8)], axis=-1)
    fluid = FluidMoments(np.ones(8), u, np.full(8, 1.5))
    residuals = viscous_identity_residual(fast12, sgrid, fluid)
    assert residuals.momentum[1] <= 1e-3
    assert residuals.heat <= 1e-3
