"""
Сетки скоростного и физического пространства.

Скорости: куб [-l_v, l_v]^3 с центрированными узлами и квадратурой средних точек.
Пространство: одномерный тор длины l_x с фурье-дифференцированием.
Функции на скоростной сетке хранятся массивами формы (..., n_v, n_v, n_v),
поля на пространственной сетке - массивами формы (n_x, ...).
"""

import logging
from typing import Optional

import numpy as np

from ..errors import CalibrationError

logger = logging.getLogger('Grids')

TWO_PI = 2.0 * np.pi


class VelocityGrid:
    """Равномерная центрированная сетка по скоростям, одинаковая по трем осям."""

    def __init__(self, n_v: int = 24, l_v: float = 7.5):
        if n_v <= 0 or n_v % 2:
            raise ValueError(f"n_v должно быть четным положительным, получено {n_v}")
        if l_v <= 0:
            raise ValueError(f"l_v должно быть положительным, получено {l_v}")
        self.n_v = int(n_v)
        self.l_v = float(l_v)
        self.dv = 2.0 * self.l_v / self.n_v
        self.weight = self.dv ** 3
        self.nodes = -self.l_v + (np.arange(self.n_v) + 0.5) * self.dv
        v1, v2, v3 = np.meshgrid(self.nodes, self.nodes, self.nodes, indexing='ij')
        self.v = np.stack([v1, v2, v3])
        self.v_sq = v1 ** 2 + v2 ** 2 + v3 ** 2
        self.shape = (self.n_v,) * 3
        for array in (self.nodes, self.v, self.v_sq):
            array.setflags(write=False)

    def __repr__(self):
        return f"VelocityGrid(n_v={self.n_v}, l_v={self.l_v})"

    def __eq__(self, other):
        return isinstance(other, VelocityGrid) and (self.n_v, self.l_v) == (other.n_v, other.l_v)

    def __hash__(self):
        return hash((self.n_v, self.l_v))

    @property
    def size(self) -> int:
        return self.n_v ** 3

    def global_maxwellian(self) -> np.ndarray:
        """Глобальный максвеллиан mu = M_[1,0,3/2], R*theta = 1."""
        return TWO_PI ** -1.5 * np.exp(-0.5 * self.v_sq)

    def sqrt_mu(self) -> np.ndarray:
        return np.sqrt(self.global_maxwellian())

    def collision_invariants(self) -> np.ndarray:
        """psi_i = (1, v1, v2, v3, |v|^2/2), форма (5, n, n, n)."""
        return np.stack([np.ones(self.shape), self.v[0], self.v[1], self.v[2], 0.5 * self.v_sq])

    def integrate_v(self, g: np.ndarray) -> np.ndarray:
        """Квадратура средних точек по трем последним осям: dv^3 * sum_k g(v_k)."""
        g = np.asarray(g)
        if not np.all(np.isfinite(g)):
            bad = np.argwhere(~np.isfinite(g))[0]
            raise ValueError(f"Неконечное значение функции в узле {tuple(int(i) for i in bad)}")
        return self.weight * g.sum(axis=(-3, -2, -1))

    def inner(self, g: np.ndarray, h: np.ndarray) -> np.ndarray:
        """<g, h> = integral g h dv (без проверки конечности)."""
        return self.weight * np.sum(g * h, axis=(-3, -2, -1))

    def fd_dv(self, g: np.ndarray, axis: int) -> np.ndarray:
        """Центральная разность 4-го порядка по оси скоростей 1..3 с нулевыми фиктивными узлами."""
        if axis not in (1, 2, 3):
            raise ValueError(f"axis должна быть 1, 2 или 3, получено {axis}")
        g = np.asarray(g, dtype=float)
        array_axis = g.ndim - 4 + axis
        pad = [(0, 0)] * g.ndim
        pad[array_axis] = (2, 2)
        padded = np.pad(g, pad)
        n = g.shape[array_axis]

        def shifted(offset: int) -> np.ndarray:
            return np.take(padded, np.arange(2 + offset, 2 + offset + n), axis=array_axis)

        return (-shifted(2) + 8.0 * shifted(1) - 8.0 * shifted(-1) + shifted(-2)) / (12.0 * self.dv)

    def grad_v(self, g: np.ndarray) -> np.ndarray:
        """Градиент по скоростям, форма (3, ...) впереди."""
        return np.stack([self.fd_dv(g, axis) for axis in (1, 2, 3)])

    def check_calibration(self, tol_quad: float = 1e-8) -> float:
        """Проверка, что квадратура глобального максвеллиана равна 1 с точностью tol_quad."""
        defect = abs(float(self.integrate_v(self.global_maxwellian())) - 1.0)
        if defect > tol_quad:
            raise CalibrationError(
                f"Квадратура mu на {self!r} отличается от 1 на {defect:.3e} > tol_quad={tol_quad:.1e}; "
                f"увеличьте n_v или l_v"
            )
        logger.debug(f"Калибровка {self!r}: дефект {defect:.3e}")
        return defect


class SpatialGrid:
    """Одномерный периодический отрезок [0, l_x) с n_x = 2^p ячейками."""

    d_x = 1  # пространственная размерность

    def __init__(self, n_x: int = 64, l_x: float = 1.0):
        if n_x < 4 or n_x & (n_x - 1):
            raise ValueError(f"n_x должно быть степенью двойки, получено {n_x}")
        if l_x <= 0:
            raise ValueError(f"l_x должно быть положительным, получено {l_x}")
        self.n_x = int(n_x)
        self.l_x = float(l_x)
        self.dx = self.l_x / self.n_x
        self.nodes = np.arange(self.n_x) * self.dx
        # Волновые числа для rfft
        self.k = TWO_PI * np.fft.rfftfreq(self.n_x, d=self.dx)
        self.nodes.setflags(write=False)
        self.k.setflags(write=False)

    def __repr__(self):
        return f"SpatialGrid(n_x={self.n_x}, l_x={self.l_x})"

    def __eq__(self, other):
        return isinstance(other, SpatialGrid) and (self.n_x, self.l_x) == (other.n_x, other.l_x)

    def __hash__(self):
        return hash((self.n_x, self.l_x))

    @property
    def max_order(self) -> int:
        return self.n_x // 4

    def _symbol(self, field_ndim: int, symbol: np.ndarray) -> np.ndarray:
        return symbol.reshape((-1,) + (1,) * (field_ndim - 1))

    def spectral_dx(self, field: np.ndarray, order: int = 1) -> np.ndarray:
        """Фурье-коллокационная производная порядка order по оси 0."""
        if order < 0:
            raise ValueError("Порядок производной должен быть неотрицательным")
        if order > self.max_order:
            raise ValueError(f"Порядок {order} превышает предел разрешения n_x/4 = {self.max_order}")
        field = np.asarray(field, dtype=float)
        if order == 0:
            return field.copy()
        symbol = (1j * self.k) ** order
        if order % 2 == 1:
            # Мода Найквиста не имеет нечетной производной
            symbol = symbol.copy()
            symbol[-1] = 0.0
        spectrum = np.fft.rfft(field, axis=0)
        return np.fft.irfft(spectrum * self._symbol(field.ndim, symbol), n=self.n_x, axis=0)

    def antiderivative(self, field: np.ndarray) -> np.ndarray:
        """Первообразная с нулевым средним; среднее поля должно быть нулевым."""
        field = np.asarray(field, dtype=float)
        spectrum = np.fft.rfft(field, axis=0)
        inverse = np.zeros_like(self.k, dtype=complex)
        inverse[1:] = 1.0 / (1j * self.k[1:])
        inverse[-1] = 0.0
        return np.fft.irfft(spectrum * self._symbol(field.ndim, inverse), n=self.n_x, axis=0)

    def dealias(self, field: np.ndarray) -> np.ndarray:
        """Правило 2/3: обнуление мод с |k| > n_x/3."""
        field = np.asarray(field, dtype=float)
        spectrum = np.fft.rfft(field, axis=0)
        cutoff = self.n_x // 3
        spectrum[cutoff + 1:] = 0.0
        return np.fft.irfft(spectrum, n=self.n_x, axis=0)

    def tail_fraction(self, field: np.ndarray) -> float:
        """Доля энергии возмущения в верхней половине сохраняемой полосы (|k| > n_x/6)."""
        spectrum = np.fft.rfft(np.asarray(field, dtype=float), axis=0)
        energy = np.abs(spectrum) ** 2
        energy = energy.reshape(energy.shape[0], -1).sum(axis=1)
        total = energy[1:].sum()
        if total == 0.0:
            return 0.0
        return float(energy[self.n_x // 6 + 1:].sum() / total)

    def integrate_x(self, field: np.ndarray) -> np.ndarray:
        return self.dx * np.asarray(field).sum(axis=0)

    def l2_norm(self, field: np.ndarray) -> float:
        """sqrt(dx * sum |field|^2) по всем компонентам."""
        return float(np.sqrt(self.dx * np.sum(np.asarray(field) ** 2)))

    def mean(self, field: np.ndarray) -> np.ndarray:
        return np.asarray(field).mean(axis=0)


def global_maxwellian(vgrid: VelocityGrid) -> np.ndarray:
    return vgrid.global_maxwellian()


def integrate_v(vgrid: VelocityGrid, g: np.ndarray) -> np.ndarray:
    return vgrid.integrate_v(g)


def spectral_dx(sgrid: SpatialGrid, field: np.ndarray, order: int = 1,
                n_sobolev: Optional[int] = None) -> np.ndarray:
    """Спектральная производная с проверкой order <= n_sobolev + 1, если задан N."""
    if n_sobolev is not None and order > n_sobolev + 1:
        raise ValueError(f"Порядок {order} превышает n_sobolev + 1 = {n_sobolev + 1}")
    return sgrid.spectral_dx(field, order)


def fd_dv(vgrid: VelocityGrid, g: np.ndarray, axis: int) -> np.ndarray:
    return vgrid.fd_dv(g, axis)
