"""Явные одношаговые схемы для кортежей массивов."""

from typing import Callable, Sequence, Tuple

import numpy as np

State = Tuple[np.ndarray, ...]
RHS = Callable[[State], State]


def _axpy(y: Sequence[np.ndarray], k: Sequence[np.ndarray], h: float) -> State:
    return tuple(a + h * b for a, b in zip(y, k))


def rk4_step(rhs: RHS, y: State, dt: float) -> State:
    """Классический Рунге-Кутта 4-го порядка."""
    k1 = rhs(y)
    k2 = rhs(_axpy(y, k1, 0.5 * dt))
    k3 = rhs(_axpy(y, k2, 0.5 * dt))
    k4 = rhs(_axpy(y, k3, dt))
    return tuple(a + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))


def ssp_rk2_step(rhs: RHS, y: State, dt: float) -> State:
    """SSP-RK2 (метод Хойна)."""
    stage = _axpy(y, rhs(y), dt)
    return tuple(0.5 * (a + b) for a, b in zip(y, _axpy(stage, rhs(stage), dt)))
