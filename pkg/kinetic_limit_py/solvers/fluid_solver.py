"""
Спектральный решатель сжимаемой системы Эйлера-Максвелла (предельный профиль).

    rho_t + d_x(rho u_1) = 0
    u_t + u_1 d_x u + (d_x p / rho) e_1 = -(E + u x B)
    theta_t + u_1 d_x theta + (2/3) theta d_x u_1 = 0
    E_t - rot B = rho u,  B_t + rot E = 0

p = (2/3) rho theta; в изэнтропическом режиме p = rho^(5/3) и theta = (3/2) rho^(2/3).
Интегрирование - RK4 с фильтром 2/3 после каждого шага.
"""

import dataclasses
import logging
from typing import Any, Dict, List, Optional

import numpy as np
from tqdm import tqdm

from ..core.grids import SpatialGrid
from ..core.maxwellian import FluidMoments, R_GAS
from ..errors import DegenerateStateError, KineticLimitError, PreconditionError, ResolutionLossError
from .em_fields import EMField, field_energy, gauss_residual, init_e_from_density, maxwell_rhs
from .integrators import rk4_step

logger = logging.getLogger('FluidSolver')

GAMMA = 5.0 / 3.0
TOL_TAIL = 1e-6


@dataclasses.dataclass(frozen=True)
class FluidState:
    """(rho_bar, u_bar, theta_bar) по ячейкам, поле и время."""

    rho: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    em: EMField
    t: float = 0.0

    def moments(self) -> FluidMoments:
        return FluidMoments(self.rho, self.u, self.theta)

    @classmethod
    def constant(cls, n_x: int, b_const: float = 0.0) -> "FluidState":
        return cls(np.ones(n_x), np.zeros((n_x, 3)), np.full(n_x, 1.5), EMField.zeros(n_x, b_const))


def theta_of_rho(rho: np.ndarray) -> np.ndarray:
    """theta = (3/2) rho^(2/3)."""
    rho = np.asarray(rho, dtype=float)
    if np.any(~(rho > 0)):
        cell = int(np.flatnonzero(np.ravel(~(rho > 0)))[0])
        raise DegenerateStateError("Неположительная плотность в theta_of_rho", cell)
    return 1.5 * rho ** (2.0 / 3.0)


def langmuir_frequency(k: float, r_theta: float = 1.0) -> float:
    """omega(k) продольной моды: omega^2 = 1 + gamma R theta k^2."""
    return float(np.sqrt(1.0 + GAMMA * r_theta * k ** 2))


def pressure(rho: np.ndarray, theta: np.ndarray, isentropic: bool = False) -> np.ndarray:
    if isentropic:
        return rho ** GAMMA
    return R_GAS * rho * theta


def euler_maxwell_rhs(sgrid: SpatialGrid, state: FluidState, isentropic: bool = False) -> FluidState:
    """Производная по времени всех пяти уравнений (t содержит 1)."""
    rho, u, theta, em = state.rho, state.u, state.theta, state.em
    if np.any(~(rho > 0)):
        cell = int(np.flatnonzero(~(rho > 0))[0])
        raise DegenerateStateError(f"Плотность rho={rho[cell]:.6e} <= 0", cell)
    dx = sgrid.spectral_dx
    d_rho = -dx(rho * u[:, 0])
    lorentz = em.E + np.cross(u, em.B)
    d_u = -u[:, [0]] * dx(u) - lorentz
    d_u[:, 0] -= dx(pressure(rho, theta, isentropic)) / rho
    if isentropic:
        d_theta = rho ** (-1.0 / 3.0) * d_rho
    else:
        d_theta = -u[:, 0] * dx(theta) - (2.0 / 3.0) * theta * dx(u[:, 0])
    d_em = maxwell_rhs(sgrid, em, rho[:, None] * u)
    return FluidState(d_rho, d_u, d_theta, d_em, 1.0)


class FluidSolver:
    """RK4 + правило 2/3 для фиксированной пространственной сетки."""

    def __init__(self, sgrid: SpatialGrid, isentropic: bool = False, tol_tail: float = TOL_TAIL):
        self.sgrid = sgrid
        self.isentropic = isentropic
        self.tol_tail = tol_tail

    def _rhs(self, y):
        rho, u, theta, E, B = y
        d = euler_maxwell_rhs(self.sgrid, FluidState(rho, u, theta, EMField(E, B)), self.isentropic)
        return d.rho, d.u, d.theta, d.em.E, d.em.B

    def step(self, state: FluidState, dt: float) -> FluidState:
        y = (state.rho, state.u, state.theta, state.em.E, state.em.B)
        rho, u, theta, E, B = (self.sgrid.dealias(a) for a in rk4_step(self._rhs, y, dt))
        return FluidState(rho, u, theta, EMField(E, B), state.t + dt)

    def tail_fraction(self, state: FluidState) -> float:
        fields = (state.rho, state.u, state.theta, state.em.E, state.em.B)
        return max(self.sgrid.tail_fraction(field) for field in fields)

    def check_resolution(self, state: FluidState):
        tail = self.tail_fraction(state)
        if tail > self.tol_tail:
            raise ResolutionLossError(
                f"Доля энергии спектрального хвоста {tail:.3e} > {self.tol_tail:.0e} на t={state.t:.4f}; "
                f"увеличьте n_x или уменьшите eta0 / t_end"
            )

    def observables(self, state: FluidState) -> Dict[str, float]:
        sgrid = self.sgrid
        gauss_e, gauss_b = gauss_residual(sgrid, state.em, state.rho)
        internal = state.rho * (state.theta + 0.5 * np.sum(state.u ** 2, axis=-1))
        return {
            "t": float(state.t),
            "mass": float(sgrid.integrate_x(state.rho)),
            "energy": float(sgrid.integrate_x(internal)) + field_energy(sgrid, state.em),
            "gauss_e": gauss_e,
            "gauss_b": gauss_b,
            "tail": self.tail_fraction(state),
            "isentropic_defect": sgrid.l2_norm(state.theta - theta_of_rho(state.rho)) / sgrid.l2_norm(state.theta),
        }


def amplitude(state: FluidState, b_const: float = 0.0) -> float:
    """Наибольшее RMS-отклонение переменной от постоянного состояния (1, 0, 3/2, 0, (b_const, 0, 0))."""
    B_ref = np.zeros(3)
    B_ref[0] = b_const
    deviations = (state.rho - 1.0, state.u, state.theta - 1.5, state.em.E, state.em.B - B_ref)
    return max(float(np.sqrt(np.mean(np.sum(np.reshape(d, (d.shape[0], -1)) ** 2, axis=-1)))) for d in deviations)


def density_perturbation_state(sgrid: SpatialGrid, delta: float, mode: int = 1, isentropic_theta: bool = True,
                               b_const: float = 0.0) -> FluidState:
    """rho = 1 + delta cos(k x), u = 0, theta = (3/2) rho^(2/3), E1 из уравнения Гаусса."""
    k = 2.0 * np.pi * mode / sgrid.l_x
    rho = 1.0 + delta * np.cos(k * sgrid.nodes)
    theta = theta_of_rho(rho) if isentropic_theta else np.full(sgrid.n_x, 1.5)
    em = EMField.zeros(sgrid.n_x, b_const)
    em = EMField(init_e_from_density(sgrid, rho), em.B)
    return FluidState(rho, np.zeros((sgrid.n_x, 3)), theta, em)


@dataclasses.dataclass
class FluidTrajectory:
    snapshots: List[FluidState] = dataclasses.field(default_factory=list)
    records: List[Dict[str, Any]] = dataclasses.field(default_factory=list)

    @property
    def final(self) -> FluidState:
        return self.snapshots[-1]

    def at(self, t: float, tol: float = 1e-9) -> FluidState:
        for state in self.snapshots:
            if abs(state.t - t) <= tol * max(1.0, abs(t)):
                return state
        raise KeyError(f"Нет снимка течения при t={t}")


def run_fluid(config, init: FluidState, isentropic: bool = False, progress: bool = False,
              check_amplitude: bool = True) -> FluidTrajectory:
    """RK4-траектория со снимками через snapshot_every шагов; потеря разрешения - ResolutionLossError."""
    sgrid = config.spatial_grid()
    if check_amplitude:
        size = amplitude(init, config.b_const)
        if size > config.eta0 * (1.0 + 1e-12):
            raise PreconditionError(f"Амплитуда начальных данных {size:.3e} превышает eta0={config.eta0:.3e}")
    solver = FluidSolver(sgrid, isentropic)
    n_steps = max(1, int(round((config.t_end - init.t) / config.dt)))
    trajectory = FluidTrajectory()

    def emit(state: FluidState):
        trajectory.snapshots.append(state)
        trajectory.records.append(solver.observables(state))

    state = init
    emit(state)
    logger.info(f"Решение Эйлера-Максвелла: dt={config.dt}, шагов {n_steps}, "
                f"{'изэнтропическая' if isentropic else 'полная'} система")
    try:
        for step in tqdm(range(1, n_steps + 1), desc="Euler-Maxwell", unit="шаг", disable=not progress):
            state = solver.step(state, config.dt)
            if step % config.snapshot_every == 0 or step == n_steps:
                solver.check_resolution(state)
                emit(state)
    except KineticLimitError as e:
        logger.error(f"Решение Эйлера-Максвелла прервано: {e}")
        raise
    return trajectory
