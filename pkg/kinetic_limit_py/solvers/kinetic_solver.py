"""
Интегрирование масштабированной системы Власова-Максвелла-Больцмана

    d_t F + v_1 d_x F - (E + v x B) . grad_v F = Q(F, F) / eps,
    d_t E - rot B = int v F dv,  d_t B + rot E = 0

с жестким членом столкновений.

Шаг - расщепление Странга: половина шага переноса (транспорт + сила + Максвелл,
явный SSP-RK2), полный шаг столкновений с BGK-пенализацией, еще половина переноса.
Шаг столкновений двухстадийный: неявный BGK-предиктор F* и пенализованный
корректор; оба решаются в явном виде, потому что максвеллиан M[F] сохраняет
моменты F. При eps -> 0 шаг проектирует F на локальный максвеллиан.
"""

import dataclasses
import logging
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from tqdm import tqdm

from ..core.collision import CollisionKernel, build_kernel
from ..core.grids import SpatialGrid, VelocityGrid
from ..core.maxwellian import discrete_maxwellian, macro_micro_split, moments_from_f
from ..errors import BlowUpError, CFLViolationError, KineticLimitError
from .em_fields import EMField, field_energy, field_momentum, gauss_residual, maxwell_rhs
from .integrators import ssp_rk2_step

logger = logging.getLogger('KineticSolver')

BLOW_UP_FACTOR = 1e6


@dataclasses.dataclass(frozen=True)
class KineticState:
    """F формы (n_x, n_v, n_v, n_v), электромагнитное поле и время."""

    F: np.ndarray
    em: EMField
    t: float = 0.0


class KineticSolver:
    """Правая часть и шаг IMEX для фиксированных сеток, ядра и eps."""

    def __init__(self, vgrid: VelocityGrid, sgrid: SpatialGrid, kernel: CollisionKernel, eps: float,
                 beta_factor: float = 1.2, cfl: float = 0.5, cell_chunk: int = 8):
        if not eps > 0:
            raise ValueError(f"eps должен быть > 0, получено {eps}")
        self.vgrid = vgrid
        self.sgrid = sgrid
        self.kernel = kernel
        self.eps = float(eps)
        self.beta_factor = beta_factor
        self.cfl = cfl
        self.cell_chunk = max(1, int(cell_chunk))
        self._beta_logged = False
        self.min_f_seen = 0.0
        self._negative_warned = False

    @classmethod
    def from_config(cls, config, kernel: Optional[CollisionKernel] = None) -> "KineticSolver":
        vgrid = config.velocity_grid()
        kernel = kernel or build_kernel(config, vgrid)
        return cls(vgrid, config.spatial_grid(), kernel, config.eps, config.beta_factor, config.cfl)

    # ------------------------------------------------------------------
    # Составные части правой части

    def collide(self, F: np.ndarray, G: Optional[np.ndarray] = None) -> np.ndarray:
        """Q(F, G) по ячейкам, блоками по cell_chunk."""
        G = F if G is None else G
        out = np.empty_like(F)
        for start in range(0, F.shape[0], self.cell_chunk):
            block = slice(start, start + self.cell_chunk)
            out[block] = self.kernel.q(F[block], G[block])
        return out

    def force(self, F: np.ndarray, em: EMField) -> np.ndarray:
        """(E + v x B) . grad_v F, сила собирается в каждом узле."""
        v = self.vgrid.v
        expand = (slice(None), None, None, None)
        E = [em.E[:, i][expand] for i in range(3)]
        B = [em.B[:, i][expand] for i in range(3)]
        a1 = E[0] + v[1] * B[2] - v[2] * B[1]
        a2 = E[1] + v[2] * B[0] - v[0] * B[2]
        a3 = E[2] + v[0] * B[1] - v[1] * B[0]
        fd = self.vgrid.fd_dv
        return a1 * fd(F, 1) + a2 * fd(F, 2) + a3 * fd(F, 3)

    def current(self, F: np.ndarray) -> np.ndarray:
        """int v F dv по ячейкам, форма (n_x, 3)."""
        return np.stack([self.vgrid.inner(F, self.vgrid.v[i]) for i in range(3)], axis=-1)

    def transport_rhs(self, F: np.ndarray, E: np.ndarray, B: np.ndarray):
        """Производная без столкновений: (-v_1 d_x F + сила, dE, dB)."""
        em = EMField(E, B)
        dF = -self.vgrid.v[0] * self.sgrid.spectral_dx(F) + self.force(F, em)
        d_em = maxwell_rhs(self.sgrid, em, self.current(F))
        return dF, d_em.E, d_em.B

    def rhs(self, state: KineticState) -> KineticState:
        """Полная производная по времени (с Q/eps); t содержит dt/dt = 1."""
        dF, dE, dB = self.transport_rhs(state.F, state.em.E, state.em.B)
        dF = dF + self.collide(state.F) / self.eps
        return KineticState(dF, EMField(dE, dB), 1.0)

    # ------------------------------------------------------------------
    # Шаг по времени

    def admissible_dt(self) -> float:
        dx = self.sgrid.dx
        return self.cfl * min(dx / self.vgrid.l_v, dx)

    def check_cfl(self, dt: float):
        admissible = self.admissible_dt()
        if dt > admissible * (1.0 + 1e-12):
            raise CFLViolationError(dt, admissible)

    def penalization(self, M: np.ndarray) -> float:
        """beta = beta_factor * max по ячейкам и узлам nu[M]."""
        chunk = self.cell_chunk
        nu_max = max(float(np.max(self.kernel.collision_frequency(M[start:start + chunk])))
                     for start in range(0, M.shape[0], chunk))
        beta = self.beta_factor * nu_max
        if not self._beta_logged:
            logger.info(f"BGK-пенализация: beta={beta:.4e} (beta_factor={self.beta_factor})")
            self._beta_logged = True
        else:
            logger.debug(f"beta={beta:.4e}")
        return beta

    def collision_step(self, F: np.ndarray, dt: float) -> np.ndarray:
        """Два этапа: F* = (F + l beta M)/(1 + l beta), F1 = (F + l (Q(F*) - beta (M - F*)) + l beta M)/(1 + l beta)."""
        M = discrete_maxwellian(moments_from_f(F, self.vgrid), self.vgrid)
        beta = self.penalization(M)
        lam = dt / self.eps
        denominator = 1.0 + lam * beta
        predictor = (F + lam * beta * M) / denominator
        explicit = self.collide(predictor) - beta * (M - predictor)
        result = (F + lam * explicit + lam * beta * M) / denominator
        self._track_negative(result)
        return result

    def _track_negative(self, F: np.ndarray):
        """Отрицательные узлы после шага столкновений: предупреждение один раз, далее debug."""
        lowest = float(np.min(F))
        if lowest >= 0.0:
            return
        relative = lowest / float(np.max(np.abs(F)))
        self.min_f_seen = min(self.min_f_seen, relative)
        logger.debug(f"Шаг столкновений: min F / max F = {relative:.3e}")
        if not self._negative_warned:
            logger.warning(f"Шаг столкновений дал отрицательные F: min F / max F = {relative:.3e}, "
                           f"узлов {int(np.count_nonzero(F < 0))}")
            self._negative_warned = True

    def transport_step(self, state: KineticState, dt: float) -> KineticState:
        F, E, B = ssp_rk2_step(lambda y: self.transport_rhs(*y), (state.F, state.em.E, state.em.B), dt)
        return KineticState(F, EMField(E, B), state.t + dt)

    def imex_step(self, state: KineticState, dt: float) -> KineticState:
        self.check_cfl(dt)
        half = self.transport_step(state, 0.5 * dt)
        collided = KineticState(self.collision_step(half.F, dt), half.em, half.t)
        return self.transport_step(collided, 0.5 * dt)

    # ------------------------------------------------------------------
    # Наблюдаемые

    def observables(self, state: KineticState) -> Dict[str, float]:
        vgrid, sgrid = self.vgrid, self.sgrid
        F = state.F
        rho = vgrid.integrate_v(F)
        kinetic_energy = float(sgrid.integrate_x(0.5 * vgrid.inner(F, vgrid.v_sq)))
        momentum = sgrid.integrate_x(self.current(F))[0] + field_momentum(sgrid, state.em)[0]
        gauss_e, gauss_b = gauss_residual(sgrid, state.em, rho)
        _, G, _ = macro_micro_split(F, vgrid, tol_micro=np.inf)
        f_max = float(np.max(F))
        return {
            "t": float(state.t),
            "mass": float(sgrid.integrate_x(rho)),
            "energy": kinetic_energy + field_energy(sgrid, state.em),
            "momentum": float(momentum),
            "gauss_e": gauss_e,
            "gauss_b": gauss_b,
            "micro_norm": float(np.sqrt(sgrid.dx * vgrid.weight * np.sum(G.values ** 2))),
            "min_f": float(np.min(F)) / f_max if f_max > 0 else 0.0,
        }


def vmb_rhs(solver: KineticSolver, state: KineticState) -> KineticState:
    return solver.rhs(state)


def imex_step(solver: KineticSolver, state: KineticState, dt: float) -> KineticState:
    return solver.imex_step(state, dt)


@dataclasses.dataclass
class KineticTrajectory:
    """Снимки через snapshot_every шагов и записи наблюдаемых для каждого снимка."""

    snapshots: List[KineticState] = dataclasses.field(default_factory=list)
    records: List[Dict[str, Any]] = dataclasses.field(default_factory=list)
    aborted: Optional[str] = None

    @property
    def final(self) -> KineticState:
        return self.snapshots[-1]


Observer = Callable[[KineticState], Dict[str, Any]]


def run_kinetic(config, init: KineticState, kernel: Optional[CollisionKernel] = None,
                observer: Optional[Observer] = None, on_snapshot: Optional[Callable[[KineticState], None]] = None,
                progress: bool = False, solver: Optional[KineticSolver] = None) -> KineticTrajectory:
    """
    Траектория от init до t_end с шагом dt.

    observer добавляет поля к записи каждого снимка (например, функционалы энергии),
    on_snapshot получает снимок сразу после его создания (запись на диск).
    Рост нормы F более чем в 10^6 раз - BlowUpError с последним корректным снимком.
    """
    solver = solver or KineticSolver.from_config(config, kernel)
    solver.check_cfl(config.dt)
    n_steps = max(1, int(round((config.t_end - init.t) / config.dt)))
    trajectory = KineticTrajectory()
    initial_norm = float(np.sqrt(np.sum(init.F ** 2)))

    def emit(state: KineticState):
        record = solver.observables(state)
        if observer is not None:
            record.update(observer(state))
        trajectory.snapshots.append(state)
        trajectory.records.append(record)
        if on_snapshot is not None:
            on_snapshot(state)
        logger.debug(f"t={state.t:.4f}: масса {record['mass']:.12e}, энергия {record['energy']:.12e}")

    state = init
    emit(state)
    logger.info(f"Кинетический запуск: eps={solver.eps}, dt={config.dt}, шагов {n_steps}")
    try:
        for step in tqdm(range(1, n_steps + 1), desc=f"VMB eps={solver.eps:g}", unit="шаг", disable=not progress):
            state = solver.imex_step(state, config.dt)
            norm = float(np.sqrt(np.sum(state.F ** 2)))
            if not np.isfinite(norm) or norm > BLOW_UP_FACTOR * initial_norm:
                raise BlowUpError(f"Норма F выросла до {norm:.3e} на t={state.t:.4f}", trajectory.snapshots[-1])
            if step % config.snapshot_every == 0 or step == n_steps:
                emit(state)
    except KineticLimitError as e:
        trajectory.aborted = str(e)
        e.trajectory = trajectory
        logger.error(f"Кинетический запуск прерван: {e}")
        raise
    return trajectory
