"""
Тесты подсистемы Максвелла: вакуумная стоячая волна, уравнение Гаусса, энергия поля.
"""

import numpy as np
import pytest

from kinetic_limit_py.core.grids import SpatialGrid
from kinetic_limit_py.errors import CompatibilityError
from kinetic_limit_py.solvers.em_fields import (EMField, curl, field_energy, field_momentum, gauss_residual,
                                                init_e_from_density, maxwell_rhs)
from kinetic_limit_py.solvers.integrators import rk4_step


def test_vacuum_standing_wave(sgrid16):
    """E2 = cos kx cos kt, B3 = sin kx sin kt решают уравнения без тока."""
    k = 2 * np.pi
    x = sgrid16.nodes
    dt, t_end = 1e-3, 0.5
    zeros = np.zeros((16, 3))

    def rhs(y):
        return maxwell_rhs(sgrid16, EMField(*y), zeros).as_tuple()

    E = zeros.copy()
    E[:, 1] = np.cos(k * x)
    state = (E, zeros.copy())
    for _ in range(int(round(t_end / dt))):
        state = rk4_step(rhs, state, dt)

    np.testing.assert_allclose(state[0][:, 1], np.cos(k * x) * np.cos(k * t_end), atol=1e-8)
    np.testing.assert_allclose(state[1][:, 2], np.sin(k * x) * np.sin(k * t_end), atol=1e-8)
    np.testing.assert_allclose(state[0][:, [0, 2]], 0.0, atol=1e-14)


def test_curl_in_one_dimension(sgrid16):
    field = np.zeros((16, 3))
    field[:, 0] = np.sin(2 * np.pi * sgrid16.nodes)
    field[:, 2] = np.sin(2 * np.pi * sgrid16.nodes)
    result = curl(sgrid16, field)
    np.testing.assert_allclose(result[:, 0], 0.0)
    np.testing.assert_allclose(result[:, 1], -2 * np.pi * np.cos(2 * np.pi * sgrid16.nodes), atol=1e-10)


def test_current_drives_electric_field(sgrid16):
    em = EMField.zeros(16, b_const=0.5)
    current = np.tile([0.1, 0.0, -0.2], (16, 1))
    derivative = maxwell_rhs(sgrid16, em, current)
    np.testing.assert_allclose(derivative.E, current)
    np.testing.assert_allclose(derivative.B, 0.0)


def test_gauss_initialization(sgrid16):
    rho = 1.0 + 0.1 * np.cos(2 * np.pi * sgrid16.nodes) - 0.05 * np.sin(4 * np.pi * sgrid16.nodes)
    E = init_e_from_density(sgrid16, rho)
    gauss_e, gauss_b = gauss_residual(sgrid16, EMField(E, np.zeros((16, 3))), rho)
    assert gauss_e < 1e-12
    assert gauss_b == 0.0
    assert abs(E[:, 0].mean()) < 1e-14
    np.testing.assert_array_equal(E[:, 1:], 0.0)


def test_gauss_incompatible_density(sgrid16):
    with pytest.raises(CompatibilityError):
        init_e_from_density(sgrid16, np.full(16, 1.1))


def test_field_energy_and_momentum():
    sgrid = SpatialGrid(8, 2.0)
    E = np.tile([1.0, 0.0, 0.0], (8, 1))
    B = np.tile([0.0, 0.0, 2.0], (8, 1))
    em = EMField(E, B)
    assert field_energy(sgrid, em) == pytest.approx(0.5 * 5.0 * 2.0)
    np.testing.assert_allclose(field_momentum(sgrid, em), [0.0, -4.0, 0.0])


def test_field_shape_validation():
    with pytest.raises(ValueError):
        EMField(np.zeros((8, 3)), np.zeros((8, 2)))
