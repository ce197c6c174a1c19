"""
Тесты оператора столкновений: символы ядра, квадратура на сфере, сохранение,
частота столкновений, линеаризация и H-теорема.
"""

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import erf

from kinetic_limit_py.core.collision import (CollisionKernel, angular_quadrature, build_kernel, conjugated_lm,
                                             entropy_production, line_symbol, nu_weight, plane_symbol,
                                             random_smooth_distribution)
from kinetic_limit_py.core.grids import VelocityGrid
from kinetic_limit_py.core.maxwellian import FluidMoments, discrete_maxwellian, eval_maxwellian
from kinetic_limit_py.errors import ConfigError, ConsistencyError
from kinetic_limit_py.harness.env_config import RunConfig


def two_bump(vgrid: VelocityGrid, shift: float = 1.5, theta: float = 0.7) -> np.ndarray:
    left = FluidMoments.constant(0.5, (-shift, 0.0, 0.0), theta)
    right = FluidMoments.constant(0.5, (shift, 0.0, 0.0), theta)
    return eval_maxwellian(left, vgrid) + eval_maxwellian(right, vgrid)


def analytic_frequency(speed: np.ndarray) -> np.ndarray:
    """2 pi E|v - X| для X ~ N(0, I)."""
    return 2 * np.pi * ((speed + 1.0 / speed) * erf(speed / np.sqrt(2))
                        + np.sqrt(2 / np.pi) * np.exp(-0.5 * speed ** 2))


class TestSymbols:

    @pytest.mark.parametrize("kappa", [0.3, 1.7, 4.0])
    def test_line_symbol_matches_quadrature(self, kappa):
        radius = 2.0
        expected, _ = quad(lambda s: abs(s) * np.cos(s * kappa), -radius, radius, points=[0.0], limit=200)
        assert float(line_symbol(kappa, radius)) == pytest.approx(expected, rel=1e-10)

    def test_line_symbol_small_argument(self):
        radius = 3.0
        kappa = np.array([0.0, 1e-6, 2e-5])
        np.testing.assert_allclose(line_symbol(kappa, radius), radius ** 2 - radius ** 4 * kappa ** 2 / 4, rtol=1e-12)

    def test_plane_symbol_is_continuous_at_switch(self):
        radius = 2.0
        below = float(plane_symbol(0.99e-4 / radius, radius))
        above = float(plane_symbol(1.01e-4 / radius, radius))
        assert below == pytest.approx(np.pi * radius ** 2, rel=1e-8)
        assert above == pytest.approx(below, rel=1e-8)


class TestAngularQuadrature:

    @pytest.mark.parametrize("rule", ["lebedev", "gauss"])
    def test_weights_cover_sphere(self, rule):
        directions, weights = angular_quadrature(rule)
        assert weights.sum() == pytest.approx(4 * np.pi, rel=1e-12)
        np.testing.assert_allclose(np.linalg.norm(directions, axis=1), 1.0, atol=1e-12)

    def test_lebedev_keeps_one_of_each_antipodal_pair(self):
        directions, _ = angular_quadrature("lebedev")
        for d in directions:
            assert not np.any(np.all(np.abs(directions + d) < 1e-10, axis=1))

    def test_unknown_rule(self):
        with pytest.raises(ConfigError):
            angular_quadrature("monte-carlo")


class TestKernel:

    def test_fast_kernel_conserves(self, fast12):
        assert fast12.verify_conservation(seed=1) <= 1e-8

    def test_direct_kernel_conserves(self, direct8):
        assert direct8.verify_conservation(seed=2, n_samples=1) <= 1e-8

    def test_bilinear_and_batched(self, fast8, rng):
        F = random_smooth_distribution(fast8.vgrid, rng)
        G = random_smooth_distribution(fast8.vgrid, rng)
        single = fast8.q(F, G)
        np.testing.assert_allclose(fast8.q(2.0 * F, G), 2.0 * single, rtol=1e-10, atol=1e-14)
        batched = fast8.q(np.stack([F, G]), np.stack([G, G]))
        np.testing.assert_allclose(batched[0], single, rtol=1e-10, atol=1e-14)

    def test_shape_mismatch(self, fast8):
        with pytest.raises(ConfigError):
            fast8.q(np.ones((4, 4, 4)), np.ones((4, 4, 4)))

    def test_direct_limited_to_small_grids(self):
        with pytest.raises(ConfigError):
            CollisionKernel(VelocityGrid(24, 7.5), mode="direct")

    def test_unknown_mode(self, vgrid8):
        with pytest.raises(ConfigError):
            CollisionKernel(vgrid8, mode="spectral")

    def test_collision_frequency_matches_closed_form(self, fast12):
        vgrid = fast12.vgrid
        nu = fast12.collision_frequency(vgrid.global_maxwellian())
        speed = np.sqrt(vgrid.v_sq)
        inside = speed < 3.0
        np.testing.assert_allclose(nu[inside], analytic_frequency(speed[inside]), rtol=3e-2)

    def test_nu_weight_equivalence_constant(self, fast8):
        weight = nu_weight(fast8, FluidMoments.constant())
        assert weight.c_equiv >= 1.0
        assert np.all(weight.values > 0)

    def test_conjugated_identity(self, fast8):
        vgrid = fast8.vgrid
        f = (1.0 + 0.5 * vgrid.v[0]) * np.exp(-0.3 * vgrid.v_sq)
        m = FluidMoments.constant(1.1, (0.1, 0.0, 0.0), 1.4)
        lhs, rhs = conjugated_lm(fast8, f, m)
        sqrt_mu = vgrid.sqrt_mu()
        scale = np.linalg.norm(sqrt_mu * lhs)
        assert np.linalg.norm(sqrt_mu * (lhs - rhs)) <= 1e-10 * scale

    def test_from_tables_reproduces_operator(self, fast8, rng):
        restored = CollisionKernel.from_tables(fast8.vgrid, fast8.header(), fast8.table_arrays())
        F = random_smooth_distribution(fast8.vgrid, rng)
        np.testing.assert_array_equal(restored.q(F, F), fast8.q(F, F))

    def test_from_tables_grid_mismatch(self, fast8, vgrid12):
        with pytest.raises(ConfigError):
            CollisionKernel.from_tables(vgrid12, fast8.header(), fast8.table_arrays())


@pytest.mark.slow
def test_equilibrium_is_nearly_stationary(fast12):
    """Q(M, M) мало по сравнению с членом ухода: ошибка дискретизации ядра."""
    M = fast12.vgrid.global_maxwellian()
    loss = M * fast12.collision_frequency(M)
    assert np.linalg.norm(fast12.q(M, M)) <= 5e-2 * np.linalg.norm(loss)


@pytest.mark.slow
def test_fast_and_direct_agree(fast8, direct8):
    F = two_bump(fast8.vgrid)
    fast = fast8.q(F, F)
    direct = direct8.q(F, F)
    assert np.linalg.norm(fast - direct) <= 0.3 * np.linalg.norm(direct)


class TestEntropyProduction:

    def test_mixture_dissipates(self, fast8):
        assert entropy_production(fast8, two_bump(fast8.vgrid, shift=1.0)) < 0.0

    def test_zero_at_equilibrium(self, fast8):
        M = discrete_maxwellian(FluidMoments.constant(1.0, (0.2, 0.0, 0.0), 1.2), fast8.vgrid)
        assert entropy_production(fast8, M) == pytest.approx(0.0, abs=1e-10)

    def test_sign_survives_translation(self, fast8):
        vgrid = fast8.vgrid
        base = two_bump(vgrid, shift=1.0)
        # Сдвиг на один узел сетки по v_1
        moved = sum(eval_maxwellian(FluidMoments.constant(0.5, (center + vgrid.dv, 0.0, 0.0), 0.7), vgrid)
                    for center in (-1.0, 1.0))
        assert entropy_production(fast8, base) < 0.0
        assert entropy_production(fast8, moved) < 0.0

    def test_nonpositive_nodes_are_masked(self, fast8, caplog):
        F = two_bump(fast8.vgrid, shift=1.0)
        F[0, 0, 0] = -1e-8
        with caplog.at_level("WARNING", logger="CollisionKernel"):
            value = entropy_production(fast8, F)
        assert np.isfinite(value) and value < 0.0
        assert "исключены" in caplog.text

    def test_single_cell_only(self, fast8):
        F = two_bump(fast8.vgrid)
        with pytest.raises(ConfigError):
            entropy_production(fast8, np.stack([F, F]))


class TestBuildCheck:

    def test_fast_kernel_passes(self, fast8):
        report = fast8.self_check(tol_cross=0.5)
        assert report["conservation"] <= 1e-8
        assert 0.0 < report["cross"] <= 0.5
        assert fast8.reference_kernel() is fast8.reference_kernel()

    def test_direct_kernel_checks_conservation_only(self, direct8):
        assert set(direct8.self_check()) == {"conservation"}
        assert direct8.reference_kernel() is direct8

    def test_tight_cross_tolerance_fails(self, fast8):
        with pytest.raises(ConsistencyError):
            fast8.self_check(tol_cross=1e-9)

    def test_build_kernel_runs_check(self):
        config = RunConfig(n_v=8, l_v=5.0, tol_quad=1e-4, tol_cross=1e-9)
        with pytest.raises(ConsistencyError):
            build_kernel(config)
        kernel = build_kernel(config.replace(kernel_check=False))
        assert kernel.mode == "fast"

    def test_large_grid_skips_cross_check(self):
        kernel = CollisionKernel(VelocityGrid(18, 7.0), mode="fast")
        report = kernel.self_check()
        assert set(report) == {"conservation"}
        with pytest.raises(ConfigError):
            kernel.reference_kernel()
