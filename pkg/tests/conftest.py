"""
Общие фикстуры: малые сетки и ядра, на которых тесты идут секунды.

Допуски в тестах откалиброваны под эти сетки (см. DESIGN.md, раздел о допусках).
"""

import numpy as np
import pytest

from kinetic_limit_py.core.collision import CollisionKernel
from kinetic_limit_py.core.grids import SpatialGrid, VelocityGrid
from kinetic_limit_py.harness.env_config import RunConfig


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    """Переменные KL_* окружения разработчика не должны влиять на тесты."""
    import os
    for key in list(os.environ):
        if key.startswith("KL_"):
            monkeypatch.delenv(key, raising=False)


@pytest.fixture(scope="session")
def vgrid8():
    return VelocityGrid(8, 5.0)


@pytest.fixture(scope="session")
def vgrid12():
    return VelocityGrid(12, 6.0)


@pytest.fixture(scope="session")
def sgrid16():
    return SpatialGrid(16, 1.0)


@pytest.fixture(scope="session")
def fast8(vgrid8):
    return CollisionKernel(vgrid8, mode="fast")


@pytest.fixture(scope="session")
def fast12(vgrid12):
    return CollisionKernel(vgrid12, mode="fast")


@pytest.fixture(scope="session")
def direct8(vgrid8):
    return CollisionKernel(vgrid8, mode="direct")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def small_config():
    """Конфигурация запуска на сетке 8^3 x 8 с коротким горизонтом."""
    return RunConfig(n_v=8, l_v=5.0, n_x=8, l_x=1.0, eps=0.1, eta0=1e-2, dt=5e-3, t_end=2e-2,
                     snapshot_every=1, tol_quad=1e-4, seed=0)
