"""
Обращение L_M на микро-подпространстве, плотная сборка и оценка коэрцитивности.

Решатель работает в переменных y = g / sqrt(M): скалярное произведение с весом 1/M
переходит в обычное L^2, а L_M - в оператор (1/sqrt(M)) L_M (sqrt(M) y), для M = mu
совпадающий с L. Узлы, где M < mu_floor * max M, исключены (y = 0), чтобы шум БПФ
не делился на крошечный sqrt(M).
"""

import dataclasses
import logging
from typing import Optional

import numpy as np
import scipy.linalg
from tqdm import tqdm

from ..errors import ConfigError, PreconditionError, SolverError
from .collision import DIRECT_MAX_NV, CollisionKernel, lm_apply
from .maxwellian import FluidMoments, KernelProjector, MacroProjector, chi_polynomials, eval_maxwellian

logger = logging.getLogger('LinearizedSolver')


class LinearizedSolver:
    """L_M, его обращение и проекторы для одного (пространственно однородного) состояния m."""

    def __init__(self, kernel: CollisionKernel, m: FluidMoments, tol_solve: float = 1e-8,
                 max_iter: int = 500, mu_floor: float = 1e-12, tol_gram: float = 1e-6,
                 tol_micro: float = 1e-9, restart: int = 100):
        if m.shape != ():
            raise ConfigError(f"LinearizedSolver ожидает состояние одной ячейки, форма {m.shape}")
        self.kernel = kernel
        self.vgrid = kernel.vgrid
        self.moments = m
        self.tol_solve = tol_solve
        self.max_iter = int(max_iter)
        self.tol_micro = tol_micro
        self.restart = int(restart)
        self.maxwellian = eval_maxwellian(m, self.vgrid)
        self.sqrt_m = np.sqrt(self.maxwellian)
        self.mask = self.maxwellian >= mu_floor * float(np.max(self.maxwellian))
        self.macro = MacroProjector(m, self.vgrid, tol_gram)
        ybasis = chi_polynomials(m, self.vgrid) * (self.sqrt_m * self.mask)
        self.projector = KernelProjector(ybasis, ybasis.copy(), self.vgrid, tol_gram=np.inf, name="N_M (y)")
        # Диагональный предобуславливатель: L_M ~ -nu + компактная часть
        nu = kernel.collision_frequency(self.maxwellian)
        self.nu = nu
        self._precond = np.where(self.mask, -1.0 / np.maximum(nu, 1e-300), 0.0)
        self.last_iterations = 0
        self.last_residual = 0.0

    def __repr__(self):
        return f"LinearizedSolver(rho={float(self.moments.rho)}, theta={float(self.moments.theta)})"

    def to_y(self, g: np.ndarray) -> np.ndarray:
        out = np.zeros(np.shape(g))
        np.divide(g, self.sqrt_m, out=out, where=np.broadcast_to(self.mask, np.shape(g)))
        return out

    def from_y(self, y: np.ndarray) -> np.ndarray:
        return self.sqrt_m * y

    def apply(self, h: np.ndarray) -> np.ndarray:
        """L_M h в исходных переменных."""
        return lm_apply(self.kernel, h, self.moments, maxwellian=self.maxwellian)

    def apply_y(self, y: np.ndarray) -> np.ndarray:
        """P1 (1/sqrt(M)) L_M (sqrt(M) y) на маске."""
        return self.projector.p1(self.to_y(self.apply(self.from_y(y))))

    def micro_defect(self, h: np.ndarray) -> float:
        """Относительная величина моментов h по инвариантам."""
        psi = self.vgrid.collision_invariants()
        moments = np.einsum('abc,iabc->i', h, psi) * self.vgrid.weight
        scale = float(self.vgrid.integrate_v(np.abs(h) * (1.0 + self.vgrid.v_sq)))
        return float(np.max(np.abs(moments))) / scale if scale > 0 else 0.0

    def solve(self, h: np.ndarray) -> np.ndarray:
        """
        g = L_M^-1 h на N_M^perp.

        h должна быть микро (иначе PreconditionError); h = 0 дает g = 0.
        Итерация - GCR с сопряженными направлениями в y-переменных, итераты
        проектируются обратно на N_M^perp на каждом шаге.
        """
        h = np.asarray(h, dtype=float)
        if h.shape != self.vgrid.shape:
            raise ConfigError(f"Форма правой части {h.shape} не совпадает с сеткой {self.vgrid.shape}")
        if not np.any(h):
            self.last_iterations, self.last_residual = 0, 0.0
            return np.zeros_like(h)
        defect = self.micro_defect(h)
        if defect > self.tol_micro:
            raise PreconditionError(f"Правая часть не микро: дефект {defect:.3e} > tol_micro={self.tol_micro:.1e}")

        b = self.projector.p1(self.to_y(h))
        norm_b = float(np.linalg.norm(b))
        x = np.zeros_like(b)
        r = b.copy()
        directions, images = [], []
        relative = 1.0
        for iteration in range(1, self.max_iter + 1):
            p = self.projector.p1(self._precond * r)
            ap = self.apply_y(p)
            for pj, apj in zip(directions, images):
                beta = float(np.vdot(ap, apj))
                ap -= beta * apj
                p -= beta * pj
            norm_ap = float(np.linalg.norm(ap))
            if norm_ap == 0.0:
                break
            p /= norm_ap
            ap /= norm_ap
            alpha = float(np.vdot(r, ap))
            x = self.projector.p1(x + alpha * p)
            r = self.projector.p1(r - alpha * ap)
            directions.append(p)
            images.append(ap)
            if len(directions) >= self.restart:
                directions, images = [], []
            relative = float(np.linalg.norm(r)) / norm_b
            logger.debug(f"GCR итерация {iteration}: невязка {relative:.3e}")
            if relative <= self.tol_solve:
                break

        # Истинная невязка, не рекуррентная
        true_residual = float(np.linalg.norm(b - self.apply_y(x))) / norm_b
        self.last_iterations, self.last_residual = iteration, true_residual
        if relative > self.tol_solve or true_residual > 10.0 * self.tol_solve:
            raise SolverError("L_M^-1 не сошелся", true_residual, iteration)
        logger.debug(f"L_M^-1: {iteration} итераций, невязка {true_residual:.3e}")
        return self.from_y(x)


def lm_inverse(kernel: CollisionKernel, h: np.ndarray, m: FluidMoments, tol_solve: float = 1e-8,
               max_iter: int = 500, **options) -> np.ndarray:
    """Однократное обращение L_M (для серии правых частей используйте LinearizedSolver)."""
    return LinearizedSolver(kernel, m, tol_solve=tol_solve, max_iter=max_iter, **options).solve(h)


@dataclasses.dataclass
class DenseOperator:
    """Матрица L_M на N_M^perp в ортонормированном базисе complement (столбцы в узлах маски)."""

    matrix: np.ndarray
    complement: np.ndarray
    indices: np.ndarray
    solver: LinearizedSolver

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def embed(self, coords: np.ndarray) -> np.ndarray:
        """Координаты -> y на всей сетке."""
        y = np.zeros(self.solver.vgrid.size)
        y[self.indices] = self.complement @ coords
        return y.reshape(self.solver.vgrid.shape)

    def restrict(self, y: np.ndarray) -> np.ndarray:
        return self.complement.T @ np.ravel(y)[self.indices]


def assemble_dense(solver: LinearizedSolver, batch: int = 32, progress: bool = True) -> DenseOperator:
    """Поколоночная сборка L_M на микро-подпространстве в y-переменных (малые сетки)."""
    vgrid = solver.vgrid
    indices = np.flatnonzero(solver.mask.ravel())
    kernel_basis = solver.projector.basis.reshape(5, -1)[:, indices].T
    q_full, _ = scipy.linalg.qr(kernel_basis, mode='full')
    complement = q_full[:, 5:]
    dimension = complement.shape[1]
    logger.info(f"Плотная сборка L_M: размерность {dimension}, маска {indices.size} из {vgrid.size} узлов")

    images = np.empty((indices.size, dimension))
    starts = range(0, dimension, batch)
    for start in tqdm(starts, desc="Сборка L_M", unit="блок", disable=not progress):
        stop = min(start + batch, dimension)
        columns = np.zeros((stop - start, vgrid.size))
        columns[:, indices] = complement[:, start:stop].T
        applied = solver.apply_y(columns.reshape((stop - start,) + vgrid.shape))
        images[:, start:stop] = applied.reshape(stop - start, -1)[:, indices].T
    matrix = complement.T @ images
    return DenseOperator(matrix, complement, indices, solver)


def dense_lm_inverse(dense: DenseOperator, h: np.ndarray) -> np.ndarray:
    """Прямое решение через плотную матрицу (эталон для итерационного решателя)."""
    solver = dense.solver
    coords = scipy.linalg.solve(dense.matrix, dense.restrict(solver.to_y(h)))
    return solver.from_y(dense.embed(coords))


@dataclasses.dataclass(frozen=True)
class CoercivityReport:
    """Константы коэрцитивности L и оценки для производных по скоростям."""

    c1: float
    asymmetry: float
    c2: float
    c_const: float
    fit_residual: float
    dimension: int


def coercivity_gap(kernel: CollisionKernel, m: Optional[FluidMoments] = None, mu_floor: float = 1e-12,
                   n_samples: int = 6, seed: int = 0, progress: bool = True) -> CoercivityReport:
    """
    c1 = min -<L g, g> / |g|_nu^2 на (ker L)^perp (обобщенная симметричная задача)
    и подгонка (c2, C) в -<d_b L g, d_b g> >= c2 |d_b g|_nu^2 - C |g|_nu^2.
    """
    vgrid = kernel.vgrid
    if vgrid.n_v > DIRECT_MAX_NV:
        raise ConfigError(f"Плотная сборка ограничена n_v <= {DIRECT_MAX_NV}, получено n_v={vgrid.n_v}")
    m = m or FluidMoments.constant(1.0, (0.0, 0.0, 0.0), 1.5)
    solver = LinearizedSolver(kernel, m, mu_floor=mu_floor)
    dense = assemble_dense(solver, progress=progress)

    matrix = dense.matrix
    symmetric = 0.5 * (matrix + matrix.T)
    asymmetry = float(np.linalg.norm(matrix - matrix.T) / np.linalg.norm(matrix))
    nu = solver.nu.ravel()[dense.indices]
    weight_matrix = dense.complement.T @ (nu[:, None] * dense.complement)
    c1 = float(scipy.linalg.eigh(-symmetric, weight_matrix, eigvals_only=True)[0])
    logger.info(f"Коэрцитивность: c1={c1:.4e}, асимметрия={asymmetry:.2e}")

    rng = np.random.default_rng(seed)
    rows, targets = [], []
    for _ in range(n_samples):
        y = _smooth_micro_sample(solver, rng)
        ly = solver.apply_y(y)
        norm_g = float(vgrid.inner(solver.nu * y, y))
        for axis in (1, 2, 3):
            dy = vgrid.fd_dv(y, axis)
            targets.append(-float(vgrid.inner(vgrid.fd_dv(ly, axis), dy)))
            rows.append([float(vgrid.inner(solver.nu * dy, dy)), -norm_g])
    rows, targets = np.asarray(rows), np.asarray(targets)
    solution, _, _, _ = scipy.linalg.lstsq(rows, targets)
    fit_residual = float(np.linalg.norm(rows @ solution - targets) / np.linalg.norm(targets))
    c2, c_const = float(solution[0]), float(solution[1])
    logger.info(f"Оценка производных: c2={c2:.4e}, C={c_const:.4e}, невязка подгонки {fit_residual:.2e}")
    return CoercivityReport(c1, asymmetry, c2, c_const, fit_residual, dense.dimension)


def _smooth_micro_sample(solver: LinearizedSolver, rng: np.random.Generator) -> np.ndarray:
    """P1 (p(v) sqrt(M)) для случайного многочлена p степени <= 3."""
    v = solver.vgrid.v
    poly = np.zeros(solver.vgrid.shape)
    for i in range(3):
        poly += rng.normal() * v[i]
        for j in range(i, 3):
            poly += rng.normal() * v[i] * v[j]
            for k in range(j, 3):
                poly += 0.3 * rng.normal() * v[i] * v[j] * v[k]
    return solver.projector.p1(poly * solver.sqrt_m * solver.mask)
