"""
Функции Барнетта, коэффициенты переноса mu(theta), kappa(theta), поправка G_bar
и тождества вязкого напряжения и теплового потока.

A_j = L_M^-1 [A^_j M], B_ij = L_M^-1 [B^_ij M], где
A^_j(c) = (|c|^2 - 5) c_j / 2, B^_ij(c) = c_i c_j - delta_ij |c|^2 / 3, c = (v - u)/sqrt(R theta).
Скалярное произведение <f, g> = int f g dv.
"""

import dataclasses
import logging
from itertools import product
from typing import Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from ..errors import ConsistencyError, SolverError
from .collision import CollisionKernel
from .grids import SpatialGrid, VelocityGrid
from .linearized import LinearizedSolver
from .maxwellian import R_GAS, FluidMoments, eval_maxwellian

logger = logging.getLogger('Burnett')

TOL_IDENTITY = 1e-5
TOL_RHO_INDEP = 1e-6


def burnett_hat(m: FluidMoments, vgrid: VelocityGrid, r_gas: float = R_GAS) -> Tuple[np.ndarray, np.ndarray]:
    """(A^_j, B^_ij) в узлах сетки при c = (v - u)/sqrt(R theta); формы (3, n, n, n) и (3, 3, n, n, n)."""
    scale = np.sqrt(r_gas * float(m.theta))
    c = np.stack([(vgrid.v[axis] - float(m.u[axis])) / scale for axis in range(3)])
    c_sq = np.sum(c ** 2, axis=0)
    a_hat = 0.5 * (c_sq - 5.0) * c
    b_hat = c[:, None] * c[None, :] - np.eye(3)[:, :, None, None, None] * c_sq / 3.0
    return a_hat, b_hat


@dataclasses.dataclass
class BurnettTable:
    """Функции Барнетта в одной ячейке и диагностика их решения."""

    moments: FluidMoments
    a_hat: np.ndarray
    b_hat: np.ndarray
    a_sol: np.ndarray
    b_sol: np.ndarray
    residuals: Dict[str, float]
    micro_defects: Dict[str, float]

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())

    @property
    def max_micro_defect(self) -> float:
        return max(self.micro_defects.values())


def _solve_indexed(solver: LinearizedSolver, rhs: np.ndarray, label: str) -> Tuple[np.ndarray, float, float]:
    try:
        solution = solver.solve(solver.macro.p1(rhs))
    except SolverError as e:
        raise SolverError(f"L_M^-1 для {label} не сошелся", e.residual, e.iterations) from e
    p0 = solver.macro.p0(solution)
    defect = float(np.max(np.abs(p0)) / max(np.max(np.abs(solution)), 1e-300))
    return solution, solver.last_residual, defect


def burnett_solve(kernel: CollisionKernel, m: FluidMoments, solver: Optional[LinearizedSolver] = None,
                  **solver_options) -> BurnettTable:
    """Три решения для A_j и шесть для B_ij (B симметрична по (i, j))."""
    vgrid = kernel.vgrid
    solver = solver or LinearizedSolver(kernel, m, **solver_options)
    M = solver.maxwellian
    a_hat, b_hat = burnett_hat(m, vgrid)
    a_sol = np.empty_like(a_hat)
    b_sol = np.empty_like(b_hat)
    residuals: Dict[str, float] = {}
    defects: Dict[str, float] = {}
    for j in range(3):
        label = f"A_{j + 1}"
        a_sol[j], residuals[label], defects[label] = _solve_indexed(solver, a_hat[j] * M, label)
    for i in range(3):
        for j in range(i, 3):
            label = f"B_{i + 1}{j + 1}"
            b_sol[i, j], residuals[label], defects[label] = _solve_indexed(solver, b_hat[i, j] * M, label)
            b_sol[j, i] = b_sol[i, j]
    table = BurnettTable(m, a_hat, b_hat, a_sol, b_sol, residuals, defects)
    logger.info(f"Функции Барнетта: theta={float(m.theta):.4f}, макс. невязка {table.max_residual:.2e}, "
                f"микро-дефект {table.max_micro_defect:.2e}")
    return table


@dataclasses.dataclass(frozen=True)
class BurnettIdentity:
    """Одна строка отчета о свойствах функций Барнетта."""

    bullet: int
    description: str
    lhs: float
    rhs: float
    defect: float
    passed: bool


def burnett_identity_report(table: BurnettTable, vgrid: VelocityGrid,
                            tol_identity: float = TOL_IDENTITY) -> List[BurnettIdentity]:
    """Все восемь свойств: дефекты нормированы на |<A^_1, A_1>| и |<B^_12, B_12>|."""
    ga = np.einsum('iabc,jabc->ij', table.a_hat, table.a_sol) * vgrid.weight
    gab = np.einsum('iabc,jkabc->ijk', table.a_hat, table.b_sol) * vgrid.weight
    gb = np.einsum('ijabc,klabc->ijkl', table.b_hat, table.b_sol) * vgrid.weight
    a_norm = abs(ga[0, 0])
    b_norm = abs(gb[0, 1, 0, 1])
    off = [(i, j) for i, j in product(range(3), repeat=2) if i != j]
    entries: List[BurnettIdentity] = []

    def positive_constant(bullet: int, description: str, values: np.ndarray, norm: float):
        values = np.asarray(values)
        defect = float((values.max() - values.min()) / norm)
        entries.append(BurnettIdentity(bullet, description, float(values.min()), float(values.max()), defect,
                                    bool(np.all(values > 0) and defect <= tol_identity)))

    def zero(bullet: int, description: str, values: np.ndarray, norm: float):
        worst = float(np.max(np.abs(values))) if np.size(values) else 0.0
        entries.append(BurnettIdentity(bullet, description, worst, 0.0, worst / norm, worst / norm <= tol_identity))

    positive_constant(1, "-<A^_i, A_i> > 0, не зависит от i", -np.diag(ga), a_norm)
    cross = np.concatenate([np.array([ga[i, j] for i, j in off]) / a_norm, gab.ravel() / np.sqrt(a_norm * b_norm)])
    zero(2, "<A^_i, A_j> = 0 (i != j), <A^_i, B_jk> = 0", cross, 1.0)
    symmetric = np.maximum(np.abs(gb - gb.transpose(2, 3, 0, 1)), np.abs(gb - gb.transpose(1, 0, 2, 3)))
    worst = float(symmetric.max())
    entries.append(BurnettIdentity(3, "<B^_ij, B_kl> = <B^_kl, B_ij> = <B^_ji, B_kl>", float(gb[0, 1, 1, 0]),
                                float(gb[1, 0, 0, 1]), worst / b_norm, worst / b_norm <= tol_identity))
    positive_constant(4, "-<B^_ij, B_ij> > 0 (i != j), не зависит от i, j",
                      np.array([-gb[i, j, i, j] for i, j in off]), b_norm)
    positive_constant(5, "<B^_ii, B_jj> > 0 (i != j), не зависит от i, j",
                      np.array([gb[i, i, j, j] for i, j in off]), b_norm)
    positive_constant(6, "-<B^_ii, B_ii> > 0, не зависит от i", np.array([-gb[i, i, i, i] for i in range(3)]), b_norm)
    rest = [gb[i, j, k, l] for i, j, k, l in product(range(3), repeat=4)
            if not ((i, j) == (k, l) or (i, j) == (l, k) or (i == j and k == l))]
    zero(7, "<B^_ij, B_kl> = 0 вне (k,l) in {(i,j), (j,i)} и i=j, k=l", np.array(rest), b_norm)
    relation = np.array([gb[i, i, i, i] - gb[i, i, j, j] - 2.0 * gb[i, j, i, j] for i, j in off])
    worst = float(np.max(np.abs(relation)))
    entries.append(BurnettIdentity(8, "<B^_ii, B_ii> - <B^_ii, B_jj> = 2 <B^_ij, B_ij>",
                                float(gb[0, 0, 0, 0] - gb[0, 0, 1, 1]), float(2.0 * gb[0, 1, 0, 1]),
                                worst / b_norm, worst / b_norm <= tol_identity))
    failed = [entry.bullet for entry in entries if not entry.passed]
    if failed:
        logger.warning(f"Свойства функций Барнетта не выполнены для пунктов {failed} "
                       f"при tol_identity={tol_identity:.1e}")
    return entries


@dataclasses.dataclass(frozen=True)
class TransportCoeffs:
    """mu(theta), kappa(theta) и их расхождение между представителями (i, j) = (1, 2)/(2, 3), j = 1/2."""

    theta: float
    mu_theta: float
    kappa_theta: float
    mu_spread: float
    kappa_spread: float
    residual: float
    consistent: bool = True


def transport_coeffs(kernel: CollisionKernel, m: FluidMoments, tol_identity: float = TOL_IDENTITY,
                     solver: Optional[LinearizedSolver] = None, **solver_options) -> TransportCoeffs:
    """mu = -R theta <B^_12, B_12>, kappa = -R^2 theta <A^_1, A_1>; проверка согласованности представителей."""
    vgrid = kernel.vgrid
    solver = solver or LinearizedSolver(kernel, m, **solver_options)
    M = solver.maxwellian
    theta = float(m.theta)
    a_hat, b_hat = burnett_hat(m, vgrid)
    residual = 0.0
    kappas, mus = [], []
    for j in (0, 1):
        a_sol, res, _ = _solve_indexed(solver, a_hat[j] * M, f"A_{j + 1}")
        kappas.append(-R_GAS ** 2 * theta * float(vgrid.inner(a_hat[j], a_sol)))
        residual = max(residual, res)
    for i, j in ((0, 1), (1, 2)):
        b_sol, res, _ = _solve_indexed(solver, b_hat[i, j] * M, f"B_{i + 1}{j + 1}")
        mus.append(-R_GAS * theta * float(vgrid.inner(b_hat[i, j], b_sol)))
        residual = max(residual, res)
    mu, kappa = mus[0], kappas[0]
    if not (mu > 0 and kappa > 0):
        raise ConsistencyError(f"Коэффициенты переноса неположительны при theta={theta}: mu={mu:.4e}, "
                               f"kappa={kappa:.4e}; дискретизация L_M некорректна")
    mu_spread = abs(mus[1] - mus[0]) / mu
    kappa_spread = abs(kappas[1] - kappas[0]) / kappa
    consistent = max(mu_spread, kappa_spread) <= tol_identity
    if not consistent:
        logger.warning(f"Представители mu/kappa расходятся: {mu_spread:.2e}, {kappa_spread:.2e} "
                       f"> tol_identity={tol_identity:.1e}")
    logger.info(f"theta={theta:.4f}: mu={mu:.6e}, kappa={kappa:.6e}")
    return TransportCoeffs(theta, mu, kappa, mu_spread, kappa_spread, residual, consistent)


class TransportCache:
    """Коэффициенты переноса, кэшированные по значению theta (они зависят только от него)."""

    def __init__(self, kernel: CollisionKernel, **solver_options):
        self.kernel = kernel
        self.solver_options = solver_options
        self._cache: Dict[float, TransportCoeffs] = {}

    def __call__(self, theta: float) -> TransportCoeffs:
        key = round(float(theta), 12)
        if key not in self._cache:
            m = FluidMoments.constant(1.0, (0.0, 0.0, 0.0), key)
            self._cache[key] = transport_coeffs(self.kernel, m, **self.solver_options)
        return self._cache[key]

    def fields(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        coeffs = [self(value) for value in np.ravel(theta)]
        mu = np.array([c.mu_theta for c in coeffs]).reshape(np.shape(theta))
        kappa = np.array([c.kappa_theta for c in coeffs]).reshape(np.shape(theta))
        return mu, kappa


def stress_and_heat_flux(W: np.ndarray, vgrid: VelocityGrid) -> Tuple[np.ndarray, np.ndarray]:
    """(int v_i v_j W dv, int |v|^2/2 v_i W dv), формы S + (3, 3) и S + (3,)."""
    v = vgrid.v
    stress = np.stack([np.stack([vgrid.inner(W, v[i] * v[j]) for j in range(3)], axis=-1)
                       for i in range(3)], axis=-2)
    heat = np.stack([vgrid.inner(W, 0.5 * vgrid.v_sq * v[i]) for i in range(3)], axis=-1)
    return stress, heat


def _gradient_source(m: FluidMoments, vgrid: VelocityGrid, d_theta: float, d_u: np.ndarray) -> np.ndarray:
    """v_1 {|v-u|^2 d theta/(2 R theta^2) + (v-u) . d u /(R theta)} M в одномерной геометрии."""
    theta = float(m.theta)
    rt = R_GAS * theta
    shifted = [vgrid.v[axis] - float(m.u[axis]) for axis in range(3)]
    shifted_sq = sum(c ** 2 for c in shifted)
    bracket = shifted_sq * d_theta / (2.0 * R_GAS * theta ** 2)
    bracket = bracket + sum(shifted[axis] * d_u[axis] for axis in range(3)) / rt
    return vgrid.v[0] * bracket * eval_maxwellian(m, vgrid)


def correction_gbar(kernel: CollisionKernel, sgrid: SpatialGrid, fluid: FluidMoments, euler_ref: FluidMoments,
                    eps: float, representation: str = "direct", progress: bool = False,
                    **solver_options) -> np.ndarray:
    """
    G_bar(x_j, v) = eps L_M^-1 P1 {v . (...) M} с градиентами (u_bar, theta_bar) из euler_ref.

    representation="direct" - одно решение на ячейку; "burnett" - через A_1 и B_1j в ячейке.
    Обе формы совпадают с точностью решателя.
    """
    vgrid = kernel.vgrid
    if representation not in ("direct", "burnett"):
        raise ValueError(f"Неизвестное представление G_bar: {representation!r}")
    d_theta = sgrid.spectral_dx(euler_ref.theta)
    d_u = sgrid.spectral_dx(euler_ref.u)
    gbar = np.zeros((sgrid.n_x,) + vgrid.shape)
    for cell in tqdm(range(sgrid.n_x), desc="G_bar", unit="ячейка", disable=not progress):
        if d_theta[cell] == 0.0 and not np.any(d_u[cell]):
            continue
        m = fluid.cell(cell)
        solver = LinearizedSolver(kernel, m, **solver_options)
        if representation == "direct":
            rhs = solver.macro.p1(_gradient_source(m, vgrid, d_theta[cell], d_u[cell]))
            gbar[cell] = solver.solve(rhs)
        else:
            a_hat, b_hat = burnett_hat(m, vgrid)
            M = solver.maxwellian
            a_1, _, _ = _solve_indexed(solver, a_hat[0] * M, "A_1")
            value = np.sqrt(R_GAS / float(m.theta)) * d_theta[cell] * a_1
            for j in range(3):
                if d_u[cell, j] != 0.0:
                    b_1j, _, _ = _solve_indexed(solver, b_hat[0, j] * M, f"B_1{j + 1}")
                    value = value + d_u[cell, j] * b_1j
            gbar[cell] = value
    return eps * gbar


@dataclasses.dataclass(frozen=True)
class ViscousResiduals:
    """Относительные L^2-невязки тождеств импульса (по компонентам) и энергии."""

    momentum: Tuple[float, float, float]
    heat: float
    momentum_lhs: np.ndarray
    momentum_rhs: np.ndarray
    heat_lhs: np.ndarray
    heat_rhs: np.ndarray


def _relative(lhs: np.ndarray, rhs: np.ndarray, sgrid: SpatialGrid) -> float:
    scale = sgrid.l2_norm(rhs)
    diff = sgrid.l2_norm(lhs - rhs)
    if scale == 0.0:
        return diff
    return diff / scale


def viscous_identity_residual(kernel: CollisionKernel, sgrid: SpatialGrid, fluid: FluidMoments,
                              cache: Optional[TransportCache] = None, progress: bool = False,
                              **solver_options) -> ViscousResiduals:
    """
    Левая часть: -d_x int v_i v_1 W dv и -d_x int |v|^2/2 v_1 W dv, W = L_M^-1 [P1 (v_1 d_x M)] по ячейкам.
    Правая часть: d_x(mu D_i1) и d_x(kappa d_x theta) + sum_i d_x(mu u_i D_i1).
    """
    vgrid = kernel.vgrid
    cache = cache or TransportCache(kernel, **solver_options)
    maxwellians = eval_maxwellian(fluid, vgrid)
    d_maxwellians = sgrid.spectral_dx(maxwellians)
    W = np.zeros_like(maxwellians)
    for cell in tqdm(range(sgrid.n_x), desc="W = L_M^-1", unit="ячейка", disable=not progress):
        source = vgrid.v[0] * d_maxwellians[cell]
        if not np.any(source):
            continue
        solver = LinearizedSolver(kernel, fluid.cell(cell), **solver_options)
        W[cell] = solver.solve(solver.macro.p1(source))
    stress, heat = stress_and_heat_flux(W, vgrid)
    momentum_lhs = -sgrid.spectral_dx(stress[:, :, 0])
    heat_lhs = -sgrid.spectral_dx(heat[:, 0])

    mu, kappa = cache.fields(fluid.theta)
    d_u = sgrid.spectral_dx(fluid.u)
    strain = np.stack([4.0 / 3.0 * d_u[:, 0], d_u[:, 1], d_u[:, 2]], axis=-1)
    momentum_rhs = sgrid.spectral_dx(mu[:, None] * strain)
    heat_rhs = (sgrid.spectral_dx(kappa * sgrid.spectral_dx(fluid.theta))
                + sgrid.spectral_dx(mu * np.sum(fluid.u * strain, axis=-1)))

    momentum = tuple(_relative(momentum_lhs[:, i], momentum_rhs[:, i], sgrid) for i in range(3))
    heat_residual = _relative(heat_lhs, heat_rhs, sgrid)
    logger.info(f"Тождества вязкости: импульс {max(momentum):.3e}, тепло {heat_residual:.3e}")
    return ViscousResiduals(momentum, heat_residual, momentum_lhs, momentum_rhs, heat_lhs, heat_rhs)
