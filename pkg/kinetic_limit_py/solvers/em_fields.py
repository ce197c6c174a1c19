"""
Подсистема Максвелла на одномерном торе: законы Ампера и Фарадея с током плазмы,
ограничения Гаусса.

В 1D grad = (d_x, 0, 0), так что rot A = (0, -d_x A3, d_x A2), и B1 стационарно.
Мода k = 0 поля E эволюционирует только по закону Ампера.
"""

import dataclasses
import logging
from typing import Tuple

import numpy as np

from ..core.grids import SpatialGrid
from ..errors import CompatibilityError

logger = logging.getLogger('EMFields')


@dataclasses.dataclass(frozen=True)
class EMField:
    """E, B формы (n_x, 3)."""

    E: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        E = np.asarray(self.E, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if E.shape != B.shape or E.ndim != 2 or E.shape[1] != 3:
            raise ValueError(f"E и B должны иметь форму (n_x, 3), получено {E.shape}, {B.shape}")
        object.__setattr__(self, 'E', E)
        object.__setattr__(self, 'B', B)

    @classmethod
    def zeros(cls, n_x: int, b_const: float = 0.0) -> "EMField":
        B = np.zeros((n_x, 3))
        B[:, 0] = b_const
        return cls(np.zeros((n_x, 3)), B)

    def as_tuple(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.E, self.B


def curl(sgrid: SpatialGrid, field: np.ndarray) -> np.ndarray:
    """rot A при grad = (d_x, 0, 0)."""
    d_field = sgrid.spectral_dx(field)
    return np.stack([np.zeros(sgrid.n_x), -d_field[:, 2], d_field[:, 1]], axis=-1)


def maxwell_rhs(sgrid: SpatialGrid, field: EMField, current: np.ndarray) -> EMField:
    """dE/dt = rot B + current, dB/dt = -rot E."""
    return EMField(curl(sgrid, field.B) + np.asarray(current, dtype=float), -curl(sgrid, field.E))


def gauss_residual(sgrid: SpatialGrid, field: EMField, rho: np.ndarray) -> Tuple[float, float]:
    """(||d_x E1 - (1 - rho)||_L2, ||d_x B1||_L2)."""
    electric = sgrid.spectral_dx(field.E[:, 0]) - (1.0 - np.asarray(rho, dtype=float))
    magnetic = sgrid.spectral_dx(field.B[:, 0])
    return sgrid.l2_norm(electric), sgrid.l2_norm(magnetic)


def init_e_from_density(sgrid: SpatialGrid, rho: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """E с нулевым средним: d_x E1 = 1 - rho, E2 = E3 = 0."""
    source = 1.0 - np.asarray(rho, dtype=float)
    mean = float(sgrid.mean(source))
    if abs(mean) > tol * max(1.0, float(np.max(np.abs(source)))):
        raise CompatibilityError(f"Среднее 1 - rho = {mean:.3e} не равно нулю: уравнение Гаусса на торе неразрешимо")
    E = np.zeros((sgrid.n_x, 3))
    E[:, 0] = sgrid.antiderivative(source - mean)
    return E


def field_energy(sgrid: SpatialGrid, field: EMField) -> float:
    """1/2 int (|E|^2 + |B|^2) dx."""
    return 0.5 * float(sgrid.integrate_x(np.sum(field.E ** 2 + field.B ** 2, axis=-1)))


def field_momentum(sgrid: SpatialGrid, field: EMField) -> np.ndarray:
    """int E x B dx."""
    return sgrid.integrate_x(np.cross(field.E, field.B))
