"""
Переменные возмущения, функционалы энергии E_N / диссипации D_N, ошибки предела
и проверка согласованности остатка Theta.

Все величины, делящиеся на sqrt(mu), вычисляются на маске mu >= mu_floor * max mu;
вне маски они полагаются равными нулю.
"""

import dataclasses
import logging
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from ..core.burnett import correction_gbar
from ..core.collision import CollisionKernel
from ..core.grids import SpatialGrid, VelocityGrid
from ..core.linearized import LinearizedSolver
from ..core.maxwellian import discrete_maxwellian, eval_maxwellian, macro_micro_split, sqrt_mu_projector
from ..errors import ConsistencyError, PreconditionError
from ..solvers.fluid_solver import FluidState
from ..solvers.kinetic_solver import KineticState

logger = logging.getLogger('Diagnostics')


def mu_mask(vgrid: VelocityGrid, mu_floor: float = 1e-12) -> np.ndarray:
    mu = vgrid.global_maxwellian()
    return mu >= mu_floor * float(np.max(mu))


def divide_sqrt_mu(g: np.ndarray, vgrid: VelocityGrid, mask: np.ndarray) -> np.ndarray:
    out = np.zeros(np.shape(g))
    np.divide(g, vgrid.sqrt_mu(), out=out, where=np.broadcast_to(mask, np.shape(g)))
    return out


@dataclasses.dataclass(frozen=True)
class PerturbationState:
    """Тильда-переменные по ячейкам и f = (G - G_bar)/sqrt(mu)."""

    rho_t: np.ndarray
    u_t: np.ndarray
    theta_t: np.ndarray
    e_t: np.ndarray
    b_t: np.ndarray
    f: np.ndarray
    eps: float
    micro_defect: float = 0.0

    def fluid_components(self) -> np.ndarray:
        """(rho~, u~, theta~), форма (n_x, 5)."""
        return np.concatenate([self.rho_t[:, None], self.u_t, self.theta_t[:, None]], axis=-1)

    def all_components(self) -> np.ndarray:
        """(rho~, u~, theta~, E~, B~), форма (n_x, 11)."""
        return np.concatenate([self.fluid_components(), self.e_t, self.b_t], axis=-1)


def perturbation_from(kin: KineticState, flu: FluidState, eps: float, kernel: CollisionKernel,
                      sgrid: SpatialGrid, tol_micro: float = 1e-9, mu_floor: float = 1e-12,
                      gbar: Optional[np.ndarray] = None, **solver_options) -> PerturbationState:
    """Вычитание предельного профиля, G из разложения F = M + G, G_bar по градиентам течения."""
    vgrid = kernel.vgrid
    if kin.F.shape[0] != sgrid.n_x or flu.rho.shape[0] != sgrid.n_x:
        raise PreconditionError(f"Сетки состояний не совпадают с {sgrid!r}")
    _, G, m = macro_micro_split(kin.F, vgrid, tol_micro=np.inf)
    if gbar is None:
        gbar = correction_gbar(kernel, sgrid, m, flu.moments(), eps, mu_floor=mu_floor, **solver_options)
    mask = mu_mask(vgrid, mu_floor)
    f = divide_sqrt_mu(G.values - gbar, vgrid, mask)

    projector = sqrt_mu_projector(vgrid, mask)
    coefficients = projector.coefficients(f)
    scale = float(np.max(vgrid.integrate_v(np.abs(f) * (1.0 + vgrid.v_sq) * vgrid.sqrt_mu())))
    defect = float(np.max(np.abs(coefficients))) / scale if scale > 0 else 0.0
    logger.debug(f"Дефект проекции f на (ker L)^perp: {defect:.3e}")
    if defect > 10.0 * tol_micro:
        raise ConsistencyError(f"f не микро: дефект {defect:.3e} > 10 * tol_micro={tol_micro:.1e}")
    f = projector.p1(f)
    return PerturbationState(m.rho - flu.rho, m.u - flu.u, m.theta - flu.theta,
                             kin.em.E - flu.em.E, kin.em.B - flu.em.B, f, float(eps), defect)


@dataclasses.dataclass
class EnergyReport:
    """E_N, D_N, разбивка по (функционал, компонента, |alpha|, |beta|) и ошибки предела."""

    e_n: float
    d_n: float
    breakdown: Dict[Tuple[str, str, int, int], float]
    limit_error_l2: float = float('nan')
    limit_error_linf_x: float = float('nan')
    t: float = 0.0


def velocity_multi_indices(order: int) -> List[Tuple[int, int, int]]:
    return [beta for beta in product(range(order + 1), repeat=3) if sum(beta) == order]


def _derivative_v(vgrid: VelocityGrid, g: np.ndarray, beta: Tuple[int, int, int]) -> np.ndarray:
    for axis, count in enumerate(beta, start=1):
        for _ in range(count):
            g = vgrid.fd_dv(g, axis)
    return g


def energy_functionals(p: PerturbationState, config, nu: np.ndarray, vgrid: Optional[VelocityGrid] = None,
                       sgrid: Optional[SpatialGrid] = None) -> EnergyReport:
    """
    E_N = sum_{a<=N-1} (|d^a w~|^2 + |d^a f|^2) + sum_{a+|b|<=N, |b|>=1} |d^a_b f|^2 + eps^2 sum_{a=N} (...),
    D_N = eps sum_{1<=a<=N} |d^a (rho~,u~,theta~)|^2 + eps |d^N f|_nu^2
          + (1/eps) sum_{a<=N-1} |d^a f|_nu^2 + (1/eps) sum_{a+|b|<=N, |b|>=1} |d^a_b f|_nu^2.
    """
    vgrid = vgrid or config.velocity_grid()
    sgrid = sgrid or config.spatial_grid()
    n = int(config.n_sobolev)
    eps = p.eps
    breakdown: Dict[Tuple[str, str, int, int], float] = {}

    def norm_x(field: np.ndarray) -> float:
        return float(sgrid.dx * np.sum(field ** 2))

    def norm_xv(g: np.ndarray, weight=1.0) -> float:
        return float(sgrid.dx * vgrid.weight * np.sum(weight * g ** 2))

    def add(key: Tuple[str, str, int, int], value: float):
        breakdown[key] = breakdown.get(key, 0.0) + value

    fluid = p.fluid_components()
    everything = p.all_components()
    for alpha in range(n + 1):
        d_all = sgrid.spectral_dx(everything, alpha)
        d_f = sgrid.spectral_dx(p.f, alpha)
        weight_e = 1.0 if alpha <= n - 1 else eps ** 2
        add(("E", "fluid", alpha, 0), weight_e * norm_x(d_all))
        add(("E", "f", alpha, 0), weight_e * norm_xv(d_f))
        if alpha >= 1:
            add(("D", "fluid", alpha, 0), eps * norm_x(sgrid.spectral_dx(fluid, alpha)))
        if alpha == n:
            add(("D", "f", alpha, 0), eps * norm_xv(d_f, nu))
        else:
            add(("D", "f", alpha, 0), norm_xv(d_f, nu) / eps)
        for order in range(1, n - alpha + 1):
            for beta in velocity_multi_indices(order):
                d_fb = _derivative_v(vgrid, d_f, beta)
                add(("E", "f", alpha, order), norm_xv(d_fb))
                add(("D", "f", alpha, order), norm_xv(d_fb, nu) / eps)

    e_n = sum(value for key, value in breakdown.items() if key[0] == "E")
    d_n = sum(value for key, value in breakdown.items() if key[0] == "D")
    return EnergyReport(e_n, d_n, breakdown)


@dataclasses.dataclass(frozen=True)
class LimitError:
    """Четыре нормы расхождения кинетического решения с предельным профилем."""

    l2: float
    linf_x: float
    field_l2: float
    field_linf: float


def limit_error(kin: KineticState, flu: FluidState, vgrid: VelocityGrid, sgrid: SpatialGrid,
                mu_floor: float = 1e-12) -> LimitError:
    """||(F - M_bar)/sqrt(mu)|| в L2_x L2_v и L^inf_x L2_v, ||(E - E_bar, B - B_bar)|| в L2_x и L^inf_x."""
    reference = discrete_maxwellian(flu.moments(), vgrid)
    h = divide_sqrt_mu(kin.F - reference, vgrid, mu_mask(vgrid, mu_floor))
    per_cell = vgrid.weight * np.sum(h ** 2, axis=(-3, -2, -1))
    fields = np.concatenate([kin.em.E - flu.em.E, kin.em.B - flu.em.B], axis=-1)
    return LimitError(
        l2=float(np.sqrt(sgrid.dx * per_cell.sum())),
        linf_x=float(np.sqrt(per_cell.max())),
        field_l2=sgrid.l2_norm(fields),
        field_linf=float(np.max(np.sqrt(np.sum(fields ** 2, axis=-1)))),
    )


def theta_residual_check(window: Sequence[KineticState], eps: float, kernel: CollisionKernel, sgrid: SpatialGrid,
                         tol_micro: float = 1e-6, **solver_options) -> float:
    """
    Относительная невязка G = L_M^-1 [eps P1(v_1 d_x M) + P1 Theta] в среднем снимке окна,
    Theta = eps d_t G + eps P1(v_1 d_x G) - eps (E + v x B) . grad_v G - Q(G, G), d_t G - центральная разность.
    """
    if len(window) != 3:
        raise PreconditionError("Окно должно содержать три последовательных снимка")
    dt_left = window[1].t - window[0].t
    dt_right = window[2].t - window[1].t
    if not np.isclose(dt_left, dt_right, rtol=1e-9) or dt_left <= 0:
        raise PreconditionError(f"Снимки не равноотстоят: {dt_left} и {dt_right}")
    vgrid = kernel.vgrid
    splits = [macro_micro_split(state.F, vgrid, tol_micro=np.inf) for state in window]
    G_prev, G, G_next = (split[1].values for split in splits)
    M, _, m = splits[1]
    state = window[1]

    d_t_G = (G_next - G_prev) / (2.0 * dt_left)
    stream = vgrid.v[0] * sgrid.spectral_dx(G)
    v = vgrid.v
    expand = (slice(None), None, None, None)
    E = [state.em.E[:, i][expand] for i in range(3)]
    B = [state.em.B[:, i][expand] for i in range(3)]
    force = ((E[0] + v[1] * B[2] - v[2] * B[1]) * vgrid.fd_dv(G, 1)
             + (E[1] + v[2] * B[0] - v[0] * B[2]) * vgrid.fd_dv(G, 2)
             + (E[2] + v[0] * B[1] - v[1] * B[0]) * vgrid.fd_dv(G, 3))
    collision = np.stack([kernel.q(G[cell], G[cell]) for cell in range(sgrid.n_x)])
    d_x_M = sgrid.spectral_dx(eval_maxwellian(m, vgrid))

    numerator = 0.0
    denominator = 0.0
    worst_defect = 0.0
    for cell in range(sgrid.n_x):
        solver = LinearizedSolver(kernel, m.cell(cell), **solver_options)
        theta = (eps * d_t_G[cell] + eps * solver.macro.p1(stream[cell]) - eps * force[cell]
                 - collision[cell])
        theta_micro = solver.macro.p1(theta)
        theta_norm = float(np.linalg.norm(theta))
        if theta_norm > 0:
            worst_defect = max(worst_defect, float(np.linalg.norm(theta - theta_micro)) / theta_norm)
        rhs = eps * solver.macro.p1(vgrid.v[0] * d_x_M[cell]) + theta_micro
        predicted = solver.solve(rhs) if np.any(rhs) else np.zeros_like(rhs)
        numerator += float(np.sum((G[cell] - predicted) ** 2))
        denominator += float(np.sum(G[cell] ** 2))
    if worst_defect > tol_micro:
        logger.warning(f"Theta не микро: дефект {worst_defect:.3e} (ошибка разности по времени)")
    if denominator == 0.0:
        return float(np.sqrt(numerator))
    residual = float(np.sqrt(numerator / denominator))
    logger.info(f"Невязка Theta при t={state.t:.4f}: {residual:.3e}")
    return residual


@dataclasses.dataclass(frozen=True)
class RateFit:
    """Прямая log(error) = slope log(eps) + intercept."""

    slope: float
    intercept: float
    r2: float
    rejected: Tuple[Tuple[float, float], ...] = ()


def fit_rate(pairs: Sequence[Tuple[float, float]]) -> RateFit:
    """Наименьшие квадраты по (log eps, log error); пары с error <= 0 отбрасываются."""
    accepted = [(e, err) for e, err in pairs if e > 0 and err > 0 and np.isfinite(err)]
    rejected = tuple((float(e), float(err)) for e, err in pairs if not (e > 0 and err > 0 and np.isfinite(err)))
    if rejected:
        logger.warning(f"fit_rate: отброшены пары {rejected}")
    if len(accepted) < 3:
        raise PreconditionError(f"Для оценки порядка нужно >= 3 пар, осталось {len(accepted)}")
    log_eps = np.log([e for e, _ in accepted])
    log_err = np.log([err for _, err in accepted])
    result = stats.linregress(log_eps, log_err)
    return RateFit(float(result.slope), float(result.intercept), float(result.rvalue ** 2), rejected)
