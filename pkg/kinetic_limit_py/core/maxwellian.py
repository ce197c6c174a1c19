"""
Гидродинамические моменты, локальные максвеллианы и проекторы P0/P1.

Обозначения: psi_i = (1, v, |v|^2/2) - инварианты столкновений,
chi_i - ортонормированный базис ядра N_M в скалярном произведении с весом 1/M,
R = 2/3, так что внутренняя энергия e = theta.
"""

import dataclasses
import logging
from typing import Optional, Tuple

import numpy as np

from ..errors import CalibrationError, DegenerateStateError
from .grids import TWO_PI, VelocityGrid

logger = logging.getLogger('Maxwellian')

R_GAS = 2.0 / 3.0


@dataclasses.dataclass(frozen=True)
class FluidMoments:
    """(rho, u, theta) по ячейкам: rho форма S, u форма S + (3,), theta форма S."""

    rho: np.ndarray
    u: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        u = np.asarray(self.u, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        if u.shape != rho.shape + (3,):
            u = np.broadcast_to(u, rho.shape + (3,)).copy()
        if theta.shape != rho.shape:
            theta = np.broadcast_to(theta, rho.shape).copy()
        object.__setattr__(self, 'rho', rho)
        object.__setattr__(self, 'u', u)
        object.__setattr__(self, 'theta', theta)
        self.check()

    def check(self):
        """rho в (0, inf) и theta > 0 в каждой ячейке."""
        bad_rho = ~(np.isfinite(self.rho) & (self.rho > 0))
        if np.any(bad_rho):
            cell = int(np.flatnonzero(bad_rho.ravel())[0])
            raise DegenerateStateError(f"Плотность rho={self.rho.ravel()[cell]:.6e} вне (0, inf)", cell)
        bad_theta = ~(np.isfinite(self.theta) & (self.theta > 0))
        if np.any(bad_theta):
            cell = int(np.flatnonzero(bad_theta.ravel())[0])
            raise DegenerateStateError(f"Температура theta={self.theta.ravel()[cell]:.6e} <= 0", cell)

    @classmethod
    def constant(cls, rho: float = 1.0, u=(0.0, 0.0, 0.0), theta: float = 1.5) -> "FluidMoments":
        return cls(np.asarray(float(rho)), np.asarray(u, dtype=float), np.asarray(float(theta)))

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.rho.shape

    def cell(self, index) -> "FluidMoments":
        return FluidMoments(self.rho[index], self.u[index], self.theta[index])

    def conserved(self) -> np.ndarray:
        """(rho, rho u, rho (theta + |u|^2/2)), форма S + (5,)."""
        energy = self.rho * (self.theta + 0.5 * np.sum(self.u ** 2, axis=-1))
        return np.concatenate([self.rho[..., None], self.rho[..., None] * self.u, energy[..., None]], axis=-1)

    def allclose(self, other: "FluidMoments", rtol: float = 1e-8, atol: float = 1e-8) -> bool:
        return (np.allclose(self.rho, other.rho, rtol=rtol, atol=atol)
                and np.allclose(self.u, other.u, rtol=rtol, atol=atol)
                and np.allclose(self.theta, other.theta, rtol=rtol, atol=atol))


@dataclasses.dataclass(frozen=True)
class DistributionField:
    """Кинетическая плотность F(x_j, v_k) и число Кнудсена запуска."""

    values: np.ndarray
    eps: float

    def check(self, vgrid: VelocityGrid):
        mass = vgrid.integrate_v(self.values)
        if np.any(mass <= 0):
            cell = int(np.flatnonzero(np.ravel(mass <= 0))[0])
            raise DegenerateStateError("Неположительная масса распределения", cell)


@dataclasses.dataclass(frozen=True)
class MicroFunction:
    """Микроскопическая функция: ортогональна инвариантам относительно M или sqrt(mu)."""

    values: np.ndarray
    reference: str = "M"  # "M" - микро относительно N_M, "sqrt_mu" - относительно ker L

    def micro_defect(self, vgrid: VelocityGrid) -> float:
        """max_i |<g, psi_i * w>| с весом w = 1 (случай M) или sqrt(mu)."""
        weight = 1.0 if self.reference == "M" else vgrid.sqrt_mu()
        psi = vgrid.collision_invariants() * weight
        moments = np.einsum('...abc,iabc->...i', self.values, psi) * vgrid.weight
        return float(np.max(np.abs(moments))) if moments.size else 0.0


def moments_from_f(F: np.ndarray, vgrid: VelocityGrid, r_gas: float = R_GAS) -> FluidMoments:
    """rho = int F, rho u = int v F, rho (theta + |u|^2/2) = int |v|^2/2 F (e = (3/2) R theta)."""
    F = np.asarray(F, dtype=float)
    rho = vgrid.integrate_v(F)
    momentum = np.stack([vgrid.inner(F, vgrid.v[axis]) for axis in range(3)], axis=-1)
    energy = 0.5 * vgrid.inner(F, vgrid.v_sq)
    bad = ~(rho > 0)
    if np.any(bad):
        cell = int(np.flatnonzero(np.ravel(bad))[0])
        raise DegenerateStateError(f"Плотность rho={np.ravel(rho)[cell]:.6e} <= 0", cell)
    u = momentum / rho[..., None]
    internal = energy / rho - 0.5 * np.sum(u ** 2, axis=-1)
    theta = internal / (1.5 * r_gas)
    return FluidMoments(rho, u, theta)


def eval_maxwellian(m: FluidMoments, vgrid: VelocityGrid, r_gas: float = R_GAS) -> np.ndarray:
    """M(v) = rho (2 pi R theta)^(-3/2) exp(-|v - u|^2 / (2 R theta)), форма S + (n, n, n)."""
    rt = r_gas * m.theta
    expand = (Ellipsis,) + (None,) * 3
    shifted_sq = sum((vgrid.v[axis] - m.u[..., axis][expand]) ** 2 for axis in range(3))
    return (m.rho[expand] * (TWO_PI * rt[expand]) ** -1.5) * np.exp(-shifted_sq / (2.0 * rt[expand]))


def log_maxwellian(m: FluidMoments, vgrid: VelocityGrid, r_gas: float = R_GAS) -> np.ndarray:
    """ln M(v) без exp: квадратичный многочлен по v, конечен и там, где M ниже underflow."""
    rt = r_gas * m.theta
    expand = (Ellipsis,) + (None,) * 3
    shifted_sq = sum((vgrid.v[axis] - m.u[..., axis][expand]) ** 2 for axis in range(3))
    return np.log(m.rho[expand]) - 1.5 * np.log(TWO_PI * rt[expand]) - shifted_sq / (2.0 * rt[expand])


def impose_moments(g: np.ndarray, target: np.ndarray, weight: np.ndarray, vgrid: VelocityGrid) -> np.ndarray:
    """Поправка g + w * sum_j c_j psi_j с точными дискретными моментами target (форма S + (5,))."""
    psi = vgrid.collision_invariants()
    psi_w = psi * weight[..., None, :, :, :] if np.ndim(weight) > 3 else psi * weight
    gram = np.einsum('...iabc,jabc->...ij', psi_w, psi) * vgrid.weight
    current = np.einsum('...abc,iabc->...i', g, psi) * vgrid.weight
    coeffs = np.linalg.solve(gram, (np.asarray(target) - current)[..., None])[..., 0]
    return g + np.einsum('...i,...iabc->...abc', coeffs, psi_w)


def discrete_maxwellian(m: FluidMoments, vgrid: VelocityGrid, r_gas: float = R_GAS) -> np.ndarray:
    """Максвеллиан с поправкой, дающей точные дискретные моменты (rho, rho u, rho (theta + |u|^2/2))."""
    M = eval_maxwellian(m, vgrid, r_gas)
    return impose_moments(M, m.conserved(), M, vgrid)


class KernelProjector:
    """
    Ортогональный проектор на пятимерное ядро.

    basis - функции b_i формы S + (5, n, n, n), dual - те же функции, умноженные на
    обратный вес (для N_M: b_i / M - многочлены). Базис ортонормализуется
    Грамом-Шмидтом через разложение Холецкого матрицы Грама.
    """

    def __init__(self, basis: np.ndarray, dual: np.ndarray, vgrid: VelocityGrid,
                 tol_gram: float = 1e-6, name: str = "N_M"):
        self.vgrid = vgrid
        gram = np.einsum('...iabc,...jabc->...ij', basis, dual) * vgrid.weight
        self.raw_gram_defect = float(np.max(np.abs(gram - np.eye(5))))
        if self.raw_gram_defect > tol_gram:
            logger.warning(f"Дефект Грама базиса {name}: {self.raw_gram_defect:.3e} > tol_gram={tol_gram:.1e}")
        else:
            logger.debug(f"Дефект Грама базиса {name}: {self.raw_gram_defect:.3e}")
        # Симметризация против ошибок округления до разложения
        gram = 0.5 * (gram + np.swapaxes(gram, -1, -2))
        lower_inv = np.linalg.inv(np.linalg.cholesky(gram))
        self.basis = np.einsum('...ij,...jabc->...iabc', lower_inv, basis)
        self.dual = np.einsum('...ij,...jabc->...iabc', lower_inv, dual)

    def coefficients(self, h: np.ndarray) -> np.ndarray:
        return np.einsum('...abc,...iabc->...i', h, self.dual) * self.vgrid.weight

    def p0(self, h: np.ndarray) -> np.ndarray:
        return np.einsum('...i,...iabc->...abc', self.coefficients(h), self.basis)

    def p1(self, h: np.ndarray) -> np.ndarray:
        return h - self.p0(h)

    def gram_defect(self) -> float:
        gram = np.einsum('...iabc,...jabc->...ij', self.basis, self.dual) * self.vgrid.weight
        return float(np.max(np.abs(gram - np.eye(5))))


def chi_polynomials(m: FluidMoments, vgrid: VelocityGrid, r_gas: float = R_GAS) -> np.ndarray:
    """chi_i / M: 1/sqrt(rho), (v_i - u_i)/sqrt(R rho theta), (|v-u|^2/(R theta) - 3)/sqrt(6 rho)."""
    expand = (Ellipsis,) + (None,) * 3
    rho = m.rho[expand]
    rt = (r_gas * m.theta)[expand]
    shifted = [vgrid.v[axis] - m.u[..., axis][expand] for axis in range(3)]
    shifted_sq = sum(c ** 2 for c in shifted)
    ones = np.ones_like(shifted_sq)
    polys = [ones / np.sqrt(rho)]
    polys += [c / np.sqrt(rho * rt) for c in shifted]
    polys.append((shifted_sq / rt - 3.0) / np.sqrt(6.0 * rho))
    return np.stack(polys, axis=-4)


class MacroProjector(KernelProjector):
    """P0 / P1 относительно локального максвеллиана M_[rho,u,theta]."""

    def __init__(self, m: FluidMoments, vgrid: VelocityGrid, tol_gram: float = 1e-6, r_gas: float = R_GAS):
        self.moments = m
        self.maxwellian = eval_maxwellian(m, vgrid, r_gas)
        polys = chi_polynomials(m, vgrid, r_gas)
        super().__init__(polys * self.maxwellian[..., None, :, :, :], polys, vgrid, tol_gram, name="N_M")

    @property
    def chi(self) -> np.ndarray:
        return self.basis


def sqrt_mu_projector(vgrid: VelocityGrid, mask: Optional[np.ndarray] = None) -> KernelProjector:
    """Проектор на ker L = span{sqrt(mu), v sqrt(mu), |v|^2 sqrt(mu)} в обычном L^2."""
    basis = vgrid.collision_invariants() * vgrid.sqrt_mu()
    if mask is not None:
        basis = basis * mask
    return KernelProjector(basis, basis.copy(), vgrid, tol_gram=np.inf, name="ker L")


def project_p0(h: np.ndarray, m: FluidMoments, vgrid: VelocityGrid, tol_gram: float = 1e-6) -> np.ndarray:
    """P0 h = sum_i <h, chi_i / M> chi_i."""
    return MacroProjector(m, vgrid, tol_gram).p0(h)


def project_p1(h: np.ndarray, m: FluidMoments, vgrid: VelocityGrid, tol_gram: float = 1e-6) -> np.ndarray:
    return h - project_p0(h, m, vgrid, tol_gram)


def macro_micro_split(F: np.ndarray, vgrid: VelocityGrid, tol_micro: float = 1e-9,
                      r_gas: float = R_GAS) -> Tuple[np.ndarray, MicroFunction, FluidMoments]:
    """F = M + G: M - максвеллиан с моментами F (с дискретной поправкой), G - микро-часть."""
    m = moments_from_f(F, vgrid, r_gas)
    M = discrete_maxwellian(m, vgrid, r_gas)
    G = MicroFunction(np.asarray(F, dtype=float) - M, reference="M")
    scale = max(float(np.max(vgrid.integrate_v(np.abs(F)))), 1e-300)
    defect = G.micro_defect(vgrid) / scale
    if defect > tol_micro:
        raise CalibrationError(f"Микро-дефект G {defect:.3e} > tol_micro={tol_micro:.1e}; проверьте калибровку сетки")
    return M, G, m
