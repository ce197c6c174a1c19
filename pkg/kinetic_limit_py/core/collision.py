"""
Оператор столкновений жестких сфер Q(F1, F2) и связанные с ним операторы.

Q(F1, F2)(v) = int int |(v - v*) . w| {F1(v') F2(v*') - F1(v) F2(v*)} dw dv*,
v' = v - [(v - v*) . w] w, v*' = v* + [(v - v*) . w] w.

Два режима ядра:
- direct: квадратура по v* на узлах сетки и по w на сфере, F в послестолкновительных
  скоростях берется трилинейной интерполяцией. Стоимость O(n_v^6 * A), только n_v <= 16.
- fast: разложение Карлемана z = s w + y (y перпендикулярен w) превращает член
  прихода в сумму по A направлениям произведений двух сверток - линейной с весом |s|
  и плоской - которые считаются через БПФ на дополненной вдвое сетке.
  Член ухода - свертка с 2 pi |z|. Стоимость O(A n_v^3 log n_v).

После вычисления выход (по умолчанию) проектируется на точное дискретное
сохранение пяти инвариантов (линейная поправка методом наименьших квадратов).
"""

import dataclasses
import logging
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.fft
from scipy.integrate import lebedev_rule
from scipy.ndimage import map_coordinates
from scipy.special import j1

from ..errors import ConfigError, ConsistencyError
from .grids import TWO_PI, VelocityGrid
from .maxwellian import FluidMoments, discrete_maxwellian, eval_maxwellian, log_maxwellian, moments_from_f

logger = logging.getLogger('CollisionKernel')

DIRECT_MAX_NV = 16
TOL_INV = 1e-8
TOL_CROSS = 0.25


def sphere_quadrature(n_theta: int, n_phi: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Узлы на полусфере cos(theta) in [0, 1] (Гаусс-Лежандр) x phi (равномерно).

    Веса удвоены: подынтегральные выражения четны по w -> -w, так что сумма
    весов равна 4 pi.
    """
    t, wt = np.polynomial.legendre.leggauss(n_theta)
    cos_theta = 0.5 * (t + 1.0)
    w_theta = 0.5 * wt
    phi = TWO_PI * (np.arange(n_phi) + 0.5) / n_phi
    sin_theta = np.sqrt(1.0 - cos_theta ** 2)
    directions = np.stack([
        np.outer(sin_theta, np.cos(phi)).ravel(),
        np.outer(sin_theta, np.sin(phi)).ravel(),
        np.repeat(cos_theta, n_phi),
    ], axis=-1)
    weights = 2.0 * np.repeat(w_theta, n_phi) * (TWO_PI / n_phi)
    return directions, weights


def lebedev_hemisphere(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Правило Лебедева, инвариантное относительно группы куба, сведенное к полусфере.

    Из каждой пары антиподов w, -w остается одна точка с удвоенным весом.
    """
    points, weights = lebedev_rule(order)
    points = np.asarray(points, dtype=float)
    if points.shape[0] == 3 and points.shape[-1] != 3:
        points = points.T
    weights = np.asarray(weights, dtype=float)
    weights = weights * (2.0 * TWO_PI / weights.sum())
    tol = 1e-12
    upper = ((points[:, 2] > tol)
             | ((np.abs(points[:, 2]) <= tol) & (points[:, 1] > tol))
             | ((np.abs(points[:, 2]) <= tol) & (np.abs(points[:, 1]) <= tol) & (points[:, 0] > 0)))
    return points[upper], 2.0 * weights[upper]


def angular_quadrature(rule: str = "lebedev", n_theta: int = 4, n_phi: int = 8,
                       lebedev_order: int = 11) -> Tuple[np.ndarray, np.ndarray]:
    if rule == "gauss":
        return sphere_quadrature(n_theta, n_phi)
    if rule == "lebedev":
        return lebedev_hemisphere(lebedev_order)
    raise ConfigError(f"Неизвестное угловое правило: {rule!r}")


def line_symbol(kappa: np.ndarray, radius: float) -> np.ndarray:
    """Фурье-символ int_{-R}^{R} |s| exp(-i s kappa) ds."""
    kappa = np.asarray(kappa, dtype=float)
    small = np.abs(radius * kappa) < 1e-4
    safe = np.where(small, 1.0, kappa)
    value = 2.0 * (radius * np.sin(radius * safe) / safe + (np.cos(radius * safe) - 1.0) / safe ** 2)
    return np.where(small, radius ** 2 - 0.25 * radius ** 4 * kappa ** 2, value)


def plane_symbol(q: np.ndarray, radius: float) -> np.ndarray:
    """Фурье-символ индикатора диска радиуса R в плоскости: 2 pi R J1(R q) / q."""
    q = np.asarray(q, dtype=float)
    small = np.abs(radius * q) < 1e-4
    safe = np.where(small, 1.0, q)
    value = TWO_PI * radius * j1(radius * safe) / safe
    return np.where(small, np.pi * radius ** 2 * (1.0 - (radius * q) ** 2 / 8.0), value)


@dataclasses.dataclass(frozen=True)
class NuWeight:
    """Частота столкновений nu(v_k) и константа эквивалентности c: c^-1 (1+|v|) <= nu <= c (1+|v|)."""

    values: np.ndarray
    c_equiv: float


class CollisionKernel:
    """Предвычисленные таблицы квадратуры/спектральных весов для Q."""

    def __init__(self, vgrid: VelocityGrid, mode: str = "fast", angular_rule: str = "lebedev",
                 lebedev_order: int = 11, n_theta: int = 4, n_phi: int = 8,
                 truncation_radius: float = 0.0, moment_fix: bool = True, tol_fix: float = 1e-5,
                 threads: int = 1):
        if mode not in ("direct", "fast"):
            raise ConfigError(f"Неизвестный режим ядра: {mode!r}")
        if mode == "direct" and vgrid.n_v > DIRECT_MAX_NV:
            raise ConfigError(f"Прямое ядро ограничено n_v <= {DIRECT_MAX_NV}, получено n_v={vgrid.n_v}")
        self.vgrid = vgrid
        self.mode = mode
        self.angular_rule = angular_rule
        self.lebedev_order = int(lebedev_order)
        self.n_theta = int(n_theta)
        self.n_phi = int(n_phi)
        self.moment_fix = moment_fix
        self.tol_fix = tol_fix
        self.threads = max(1, int(threads))
        self.padded = 2 * vgrid.n_v
        # Период дополненной сетки 4 l_v; носитель S и радиус R = 2 S без наложения
        if truncation_radius and truncation_radius > 0:
            self.truncation_radius = float(truncation_radius)
        else:
            self.truncation_radius = 8.0 * vgrid.l_v / (3.0 + np.sqrt(2.0))
        self.directions, self.angular_weights = angular_quadrature(
            angular_rule, self.n_theta, self.n_phi, self.lebedev_order)
        self.max_fix_seen = 0.0
        self._fix_warned = False

        self._build_moment_fix()
        if mode == "fast":
            self._build_fast_tables()
        logger.info(f"Ядро столкновений: режим={mode}, n_v={vgrid.n_v}, l_v={vgrid.l_v}, "
                    f"A={self.rank}, R={self.truncation_radius:.4f}")

    def __repr__(self):
        return f"CollisionKernel(mode={self.mode!r}, {self.vgrid!r}, A={self.rank})"

    @property
    def rank(self) -> int:
        return len(self.angular_weights)

    # ------------------------------------------------------------------
    # Построение таблиц

    def _build_moment_fix(self):
        """Линейный проектор на нулевые моменты с весом exp(-|v|^2/2)."""
        vgrid = self.vgrid
        psi = vgrid.collision_invariants()
        self._fix_weighted = psi * np.exp(-0.5 * vgrid.v_sq)
        self._fix_psi = psi
        gram = np.einsum('iabc,jabc->ij', self._fix_weighted, psi) * vgrid.weight
        self._fix_gram_inv = np.linalg.inv(gram)

    def _frequency_mesh(self):
        dv = self.vgrid.dv
        k_full = TWO_PI * np.fft.fftfreq(self.padded, d=dv)
        k_half = TWO_PI * np.fft.rfftfreq(self.padded, d=dv)
        return np.meshgrid(k_full, k_full, k_half, indexing='ij')

    def _build_fast_tables(self):
        radius = self.truncation_radius
        k1, k2, k3 = self._frequency_mesh()
        k_sq = k1 ** 2 + k2 ** 2 + k3 ** 2
        shape = (self.rank,) + k1.shape
        self.line_weights = np.empty(shape)
        self.plane_weights = np.empty(shape)
        for p, omega in enumerate(self.directions):
            kappa = k1 * omega[0] + k2 * omega[1] + k3 * omega[2]
            q = np.sqrt(np.maximum(k_sq - kappa ** 2, 0.0))
            self.line_weights[p] = line_symbol(kappa, radius)
            self.plane_weights[p] = plane_symbol(q, radius)

        # Член ухода: 2 pi |z| на решетке смещений, усеченный шаром |z| <= R
        offsets = np.fft.fftfreq(self.padded) * self.padded * self.vgrid.dv
        z1, z2, z3 = np.meshgrid(offsets, offsets, offsets, indexing='ij')
        z_norm = np.sqrt(z1 ** 2 + z2 ** 2 + z3 ** 2)
        loss_kernel = np.where(z_norm <= radius, TWO_PI * z_norm, 0.0)
        self.loss_weights = scipy.fft.rfftn(loss_kernel, workers=self.threads).real * self.vgrid.weight

    # ------------------------------------------------------------------
    # Вспомогательные операции

    def _pad(self, f: np.ndarray) -> np.ndarray:
        n = self.vgrid.n_v
        padded = np.zeros(f.shape[:-3] + (self.padded,) * 3)
        padded[..., :n, :n, :n] = f
        return padded

    def _rfft(self, f: np.ndarray) -> np.ndarray:
        return scipy.fft.rfftn(self._pad(f), axes=(-3, -2, -1), workers=self.threads)

    def _irfft(self, spectrum: np.ndarray) -> np.ndarray:
        n = self.vgrid.n_v
        full = scipy.fft.irfftn(spectrum, s=(self.padded,) * 3, axes=(-3, -2, -1), workers=self.threads)
        return full[..., :n, :n, :n]

    def _check_input(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape[-3:] != self.vgrid.shape:
            raise ConfigError(f"Форма входа {f.shape} не совпадает с сеткой ядра {self.vgrid.shape}")
        return f

    def conservative_fix(self, q: np.ndarray, scale: Optional[np.ndarray] = None) -> np.ndarray:
        """q - w sum_ij psi_i G^-1_ij <psi_j, q>: точное дискретное сохранение пяти инвариантов."""
        moments = np.einsum('...abc,iabc->...i', q, self._fix_psi) * self.vgrid.weight
        coeffs = moments @ self._fix_gram_inv.T
        correction = np.einsum('...i,iabc->...abc', coeffs, self._fix_weighted)
        if scale is not None:
            reference = float(np.sqrt(np.sum(scale ** 2)))
            if reference > 0:
                magnitude = float(np.sqrt(np.sum(correction ** 2))) / reference
                self.max_fix_seen = max(self.max_fix_seen, magnitude)
                logger.debug(f"Поправка моментов: {magnitude:.3e}")
                if magnitude > self.tol_fix and not self._fix_warned:
                    logger.warning(f"Поправка моментов {magnitude:.3e} превышает tol_fix={self.tol_fix:.1e}")
                    self._fix_warned = True
        return q - correction

    # ------------------------------------------------------------------
    # Оператор Q

    def q_fast(self, F1: np.ndarray, F2: np.ndarray) -> np.ndarray:
        """Быстрое спектральное вычисление усеченного периодизованного оператора."""
        if self.mode != "fast":
            raise ConfigError("q_fast требует ядро, построенное в режиме 'fast'")
        F1 = self._check_input(F1)
        F2 = self._check_input(F2)
        F1_hat = self._rfft(F1)
        F2_hat = self._rfft(F2)
        gain = np.zeros(np.broadcast_shapes(F1.shape, F2.shape))
        for p in range(self.rank):
            line = self._irfft(F1_hat * self.line_weights[p])
            plane = self._irfft(F2_hat * self.plane_weights[p])
            gain += self.angular_weights[p] * line * plane
        loss = F1 * self._irfft(F2_hat * self.loss_weights)
        return self._finish(gain, loss)

    def q_direct(self, F1: np.ndarray, F2: np.ndarray, chunk: int = 64) -> np.ndarray:
        """Прямая квадратура (1.2) с трилинейной интерполяцией в послестолкновительных скоростях."""
        F1 = self._check_input(F1)
        F2 = self._check_input(F2)
        if self.vgrid.n_v > DIRECT_MAX_NV:
            raise ConfigError(f"Прямое ядро ограничено n_v <= {DIRECT_MAX_NV}")
        F1, F2 = np.broadcast_arrays(F1, F2)
        batch_shape = F1.shape[:-3]
        gain = np.empty(F1.shape)
        loss = np.empty(F1.shape)
        for index in np.ndindex(*batch_shape):
            gain[index], loss[index] = self._direct_single(F1[index], F2[index], chunk)
        return self._finish(gain, loss)

    def _direct_single(self, f1: np.ndarray, f2: np.ndarray, chunk: int) -> Tuple[np.ndarray, np.ndarray]:
        vgrid = self.vgrid
        nodes = vgrid.v.reshape(3, -1).T
        f2_flat = f2.ravel()
        gain = np.zeros(nodes.shape[0])
        loss_rate = np.zeros(nodes.shape[0])

        def to_index(points: np.ndarray) -> np.ndarray:
            return ((points + vgrid.l_v) / vgrid.dv - 0.5).reshape(-1, 3).T

        for start in range(0, nodes.shape[0], chunk):
            v = nodes[start:start + chunk]
            z = v[:, None, :] - nodes[None, :, :]
            loss_rate[start:start + chunk] = TWO_PI * np.sqrt(np.sum(z ** 2, axis=-1)) @ f2_flat
            for omega, weight in zip(self.directions, self.angular_weights):
                s = z @ omega
                shift = s[..., None] * omega
                v_prime = v[:, None, :] - shift
                v_star_prime = nodes[None, :, :] + shift
                f1_prime = map_coordinates(f1, to_index(v_prime), order=1, mode='constant', cval=0.0)
                f2_prime = map_coordinates(f2, to_index(v_star_prime), order=1, mode='constant', cval=0.0)
                products = (np.abs(s).ravel() * f1_prime * f2_prime).reshape(s.shape)
                gain[start:start + chunk] += weight * products.sum(axis=1)
        gain = gain.reshape(vgrid.shape) * vgrid.weight
        loss = f1 * loss_rate.reshape(vgrid.shape) * vgrid.weight
        return gain, loss

    def _finish(self, gain: np.ndarray, loss: np.ndarray) -> np.ndarray:
        q = gain - loss
        if self.moment_fix:
            q = self.conservative_fix(q, scale=loss)
        return q

    def q(self, F1: np.ndarray, F2: np.ndarray) -> np.ndarray:
        """Q в режиме ядра."""
        if self.mode == "fast":
            return self.q_fast(F1, F2)
        return self.q_direct(F1, F2)

    def collision_frequency(self, M: np.ndarray) -> np.ndarray:
        """nu(v) = 2 pi int |v - v*| M(v*) dv* (частота члена ухода)."""
        M = self._check_input(M)
        if self.mode == "fast":
            return self._irfft(self._rfft(M) * self.loss_weights)
        ones = np.ones(self.vgrid.shape)
        result = np.empty(M.shape)
        for index in np.ndindex(*M.shape[:-3]):
            result[index] = self._direct_single_loss(ones, M[index])
        return result

    def _direct_single_loss(self, f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
        nodes = self.vgrid.v.reshape(3, -1).T
        rate = np.empty(nodes.shape[0])
        for start in range(0, nodes.shape[0], 256):
            z = nodes[start:start + 256, None, :] - nodes[None, :, :]
            rate[start:start + 256] = TWO_PI * np.sqrt(np.sum(z ** 2, axis=-1)) @ f2.ravel()
        return f1 * rate.reshape(self.vgrid.shape) * self.vgrid.weight

    def verify_conservation(self, seed: int = 0, n_samples: int = 3, tol: float = 1e-8) -> float:
        """Проверка сохранения инвариантов на случайных гладких F (при построении ядра)."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        psi = self.vgrid.collision_invariants()
        for _ in range(n_samples):
            F = random_smooth_distribution(self.vgrid, rng)
            moments = np.einsum('abc,iabc->i', self.q(F, F), psi) * self.vgrid.weight
            worst = max(worst, float(np.max(np.abs(moments))) / float(np.sqrt(np.sum(F ** 2))))
        if worst > tol:
            logger.warning(f"Дефект сохранения ядра {self.mode}: {worst:.3e} > {tol:.1e}")
        else:
            logger.info(f"Дефект сохранения ядра {self.mode}: {worst:.3e}")
        return worst

    def reference_kernel(self) -> "CollisionKernel":
        """Прямое ядро на той же сетке и с тем же угловым правилом (создается один раз)."""
        if self.mode == "direct":
            return self
        reference = getattr(self, "_reference", None)
        if reference is None:
            if self.vgrid.n_v > DIRECT_MAX_NV:
                raise ConfigError(f"Прямое ядро ограничено n_v <= {DIRECT_MAX_NV}, получено n_v={self.vgrid.n_v}")
            reference = CollisionKernel(self.vgrid, mode="direct", angular_rule=self.angular_rule,
                                        lebedev_order=self.lebedev_order, n_theta=self.n_theta, n_phi=self.n_phi,
                                        moment_fix=self.moment_fix, tol_fix=self.tol_fix, threads=self.threads)
            self._reference = reference
        return reference

    def cross_gap(self, F: Optional[np.ndarray] = None) -> float:
        """||q(F, F) - q_direct(F, F)|| относительно нормы члена ухода F nu[F]."""
        F = calibration_distribution(self.vgrid) if F is None else self._check_input(F)
        reference = self.reference_kernel()
        difference = np.linalg.norm(self.q(F, F) - reference.q_direct(F, F))
        return float(difference / np.linalg.norm(F * self.collision_frequency(F)))

    def self_check(self, tol_inv: float = TOL_INV, tol_cross: float = TOL_CROSS) -> Dict[str, float]:
        """
        Проверки при построении ядра.

        Сохранение инвариантов на случайных гладких F; для быстрого ядра при
        n_v <= DIRECT_MAX_NV еще и сверка с прямым на калибровочном входе.
        Нарушение - ConsistencyError.
        """
        report = {"conservation": self.verify_conservation(n_samples=2, tol=tol_inv)}
        if report["conservation"] > tol_inv:
            raise ConsistencyError(f"Ядро {self.mode} нарушает сохранение инвариантов: "
                                   f"{report['conservation']:.3e} > tol_inv={tol_inv:.1e}")
        if self.mode == "fast" and self.vgrid.n_v <= DIRECT_MAX_NV:
            report["cross"] = self.cross_gap()
            if report["cross"] > tol_cross:
                raise ConsistencyError(f"Быстрое и прямое ядра расходятся на калибровочном входе: "
                                       f"{report['cross']:.3e} > tol_cross={tol_cross:.1e}")
            logger.info(f"Сверка с прямым ядром: {report['cross']:.3e} (tol_cross={tol_cross:.1e})")
        elif self.mode == "fast":
            logger.info(f"Сверка с прямым ядром пропущена: n_v={self.vgrid.n_v} > {DIRECT_MAX_NV}")
        # Поправки моментов на случайных входах не относятся к запуску
        self.max_fix_seen = 0.0
        self._fix_warned = False
        return report

    # ------------------------------------------------------------------
    # Сохранение таблиц

    def table_arrays(self):
        arrays = {
            "directions": self.directions,
            "angular_weights": self.angular_weights,
        }
        if self.mode == "fast":
            arrays.update(line_weights=self.line_weights, plane_weights=self.plane_weights,
                          loss_weights=self.loss_weights)
        return arrays

    def header(self):
        return {
            "mode": self.mode, "n_v": self.vgrid.n_v, "l_v": self.vgrid.l_v,
            "angular_rule": self.angular_rule, "lebedev_order": self.lebedev_order,
            "n_theta": self.n_theta, "n_phi": self.n_phi,
            "truncation_radius": self.truncation_radius, "moment_fix": self.moment_fix,
        }

    @classmethod
    def from_tables(cls, vgrid: VelocityGrid, header, arrays, threads: int = 1,
                    tol_fix: float = 1e-5) -> "CollisionKernel":
        """Восстановление ядра из сохраненных таблиц без пересчета символов."""
        if (header["n_v"], header["l_v"]) != (vgrid.n_v, vgrid.l_v):
            raise ConfigError(f"Таблицы ядра построены для n_v={header['n_v']}, l_v={header['l_v']}, "
                              f"запрошена сетка {vgrid!r}")
        kernel = cls.__new__(cls)
        kernel.vgrid = vgrid
        kernel.mode = header["mode"]
        kernel.angular_rule = header["angular_rule"]
        kernel.lebedev_order = int(header["lebedev_order"])
        kernel.n_theta = int(header["n_theta"])
        kernel.n_phi = int(header["n_phi"])
        kernel.moment_fix = bool(header["moment_fix"])
        kernel.tol_fix = tol_fix
        kernel.threads = max(1, int(threads))
        kernel.padded = 2 * vgrid.n_v
        kernel.truncation_radius = float(header["truncation_radius"])
        kernel.directions = arrays["directions"]
        kernel.angular_weights = arrays["angular_weights"]
        kernel.max_fix_seen = 0.0
        kernel._fix_warned = False
        kernel._build_moment_fix()
        if kernel.mode == "fast":
            kernel.line_weights = arrays["line_weights"]
            kernel.plane_weights = arrays["plane_weights"]
            kernel.loss_weights = arrays["loss_weights"]
        return kernel


def random_smooth_distribution(vgrid: VelocityGrid, rng: np.random.Generator, n_bumps: int = 3) -> np.ndarray:
    """Положительная гладкая смесь максвеллианов со случайными параметрами."""
    F = np.zeros(vgrid.shape)
    for _ in range(n_bumps):
        m = FluidMoments.constant(rng.uniform(0.3, 1.0), rng.uniform(-0.5, 0.5, size=3), rng.uniform(1.0, 2.0))
        F += eval_maxwellian(m, vgrid)
    return F


def calibration_distribution(vgrid: VelocityGrid) -> np.ndarray:
    """Два встречных пучка u = (+-1, 0, 0), theta = 3/2: фиксированный вход сверки режимов ядра."""
    return sum(eval_maxwellian(FluidMoments.constant(0.5, (shift, 0.0, 0.0), 1.5), vgrid) for shift in (-1.0, 1.0))


def build_kernel(config, vgrid: Optional[VelocityGrid] = None, mode: Optional[str] = None) -> CollisionKernel:
    """Ядро по параметрам RunConfig; при kernel_check - проверки сохранения и сверка режимов."""
    vgrid = vgrid or config.velocity_grid()
    kernel = CollisionKernel(vgrid, mode=mode or config.kernel_mode, angular_rule=config.angular_rule,
                             lebedev_order=config.lebedev_order, n_theta=config.n_theta, n_phi=config.n_phi,
                             truncation_radius=config.truncation_radius, moment_fix=config.moment_fix,
                             tol_fix=config.tol_fix, threads=config.threads)
    if config.kernel_check:
        kernel.self_check(config.tol_inv, config.tol_cross)
    return kernel


# ----------------------------------------------------------------------
# Линеаризованные операторы

def q_direct(kernel: CollisionKernel, F1: np.ndarray, F2: np.ndarray) -> np.ndarray:
    return kernel.q_direct(F1, F2)


def q_fast(kernel: CollisionKernel, F1: np.ndarray, F2: np.ndarray) -> np.ndarray:
    return kernel.q_fast(F1, F2)


def lm_apply(kernel: CollisionKernel, h: np.ndarray, m: FluidMoments,
             maxwellian: Optional[np.ndarray] = None) -> np.ndarray:
    """L_M h = Q(h, M) + Q(M, h)."""
    M = eval_maxwellian(m, kernel.vgrid) if maxwellian is None else maxwellian
    return kernel.q(h, M) + kernel.q(M, h)


def gamma(kernel: CollisionKernel, h: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Gamma(h, g) = Q(sqrt(mu) h, sqrt(mu) g) / sqrt(mu)."""
    sqrt_mu = kernel.vgrid.sqrt_mu()
    return kernel.q(sqrt_mu * h, sqrt_mu * g) / sqrt_mu


def linearized_gamma(kernel: CollisionKernel, h: np.ndarray) -> np.ndarray:
    """Оператор L h = Gamma(h, sqrt(mu)) + Gamma(sqrt(mu), h)."""
    sqrt_mu = kernel.vgrid.sqrt_mu()
    return gamma(kernel, h, sqrt_mu) + gamma(kernel, sqrt_mu, h)


def conjugated_lm(kernel: CollisionKernel, f: np.ndarray, m: FluidMoments) -> Tuple[np.ndarray, np.ndarray]:
    """
    Обе стороны тождества (1/sqrt(mu)) L_M(sqrt(mu) f) = L f + Gamma((M-mu)/sqrt(mu), f) + Gamma(f, (M-mu)/sqrt(mu)).

    Возвращает (левая часть, правая часть).
    """
    vgrid = kernel.vgrid
    sqrt_mu = vgrid.sqrt_mu()
    M = eval_maxwellian(m, vgrid)
    lhs = lm_apply(kernel, sqrt_mu * f, m, maxwellian=M) / sqrt_mu
    deviation = (M - vgrid.global_maxwellian()) / sqrt_mu
    rhs = linearized_gamma(kernel, f) + gamma(kernel, deviation, f) + gamma(kernel, f, deviation)
    return lhs, rhs


def nu_weight(kernel: CollisionKernel, m: FluidMoments) -> NuWeight:
    """nu(v) = 2 pi int |v - v*| M(v*) dv* и константа эквивалентности nu ~ 1 + |v|."""
    M = eval_maxwellian(m, kernel.vgrid)
    values = kernel.collision_frequency(M)
    ratio = values / (1.0 + np.sqrt(kernel.vgrid.v_sq))
    c_equiv = float(max(np.max(ratio), 1.0 / np.min(ratio)))
    return NuWeight(values, c_equiv)


def entropy_production(kernel: CollisionKernel, F: np.ndarray) -> float:
    """
    int Q(F, F) ln F dv для одной ячейки, Q - прямой квадратурой.

    Считается в равносильной форме int (Q(F, F) - Q(M, M)) ln(F / M) dv, M - максвеллиан
    с моментами F. В непрерывной задаче Q(M, M) = 0, а ln M - комбинация инвариантов;
    на сетке вычитание убирает ошибку равновесия ядра, и значение равно нулю на
    дискретном максвеллиане. Узлы с F <= 0 исключаются из интеграла и отмечаются
    в логе. При n_v > DIRECT_MAX_NV используется ядро в его собственном режиме.
    """
    F = kernel._check_input(F)
    if F.ndim != 3:
        raise ConfigError(f"entropy_production ожидает функцию одной ячейки, получена форма {F.shape}")
    vgrid = kernel.vgrid
    reference = kernel.reference_kernel() if vgrid.n_v <= DIRECT_MAX_NV else kernel
    m = moments_from_f(F, vgrid)
    M = discrete_maxwellian(m, vgrid)
    production = reference.q(F, F) - reference.q(M, M)

    positive = F > 0
    nonpositive = int(F.size - np.count_nonzero(positive))
    if nonpositive:
        logger.warning(f"entropy_production: {nonpositive} узлов с F <= 0 исключены из интеграла")
    log_ratio = np.zeros_like(F)
    log_ratio[positive] = np.log(F[positive]) - log_maxwellian(m, vgrid)[positive]
    return float(vgrid.inner(production, log_ratio))
