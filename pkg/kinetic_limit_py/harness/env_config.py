#!/usr/bin/env python3
"""
Загрузчик конфигурации запусков из файла key=value и переменных окружения.

Порядок приоритета (от низшего к высшему):
1. значения по умолчанию (файл конфигурации не обязателен);
2. плоский файл key=value (--config или стандартные места поиска);
3. переменные окружения KL_<КЛЮЧ>;
4. флаги командной строки (--threads, --seed, --out).
"""

import dataclasses
import hashlib
import logging
import math
import os
from typing import Any, Dict, List, Mapping, Optional, Tuple

from ..errors import ConfigError

logger = logging.getLogger('EnvConfig')

ENV_PREFIX = "KL_"
CONFIG_FILE_NAME = "kinetic-limit.conf"


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Параметры одного запуска: сетки, eps, горизонт, ядро столкновений и допуски."""

    # Сетки
    n_v: int = 24
    l_v: float = 7.5
    n_x: int = 64
    l_x: float = 1.0

    # Физика и горизонт
    eps: float = 0.1
    eta0: float = 1e-2
    a_exp: float = 0.0
    n_sobolev: int = 2
    dt: float = 1e-3
    t_end: float = 0.5
    snapshot_every: int = 50
    b_const: float = 0.0
    r_gas: float = 2.0 / 3.0
    n_b: float = 1.0

    # Ядро столкновений
    kernel_mode: str = "fast"
    angular_rule: str = "lebedev"
    lebedev_order: int = 11
    n_theta: int = 4
    n_phi: int = 8
    truncation_radius: float = 0.0  # 0 - автоматический выбор по периоду дополненной сетки
    moment_fix: bool = True
    kernel_check: bool = True  # сохранение и сверка fast/direct при построении

    # Интегратор
    beta_factor: float = 1.2
    cfl: float = 0.5

    # Допуски
    tol_quad: float = 1e-8
    tol_micro: float = 1e-9
    tol_gram: float = 1e-6
    tol_solve: float = 1e-8
    tol_fix: float = 1e-5
    tol_inv: float = 1e-8
    tol_cross: float = 0.25  # относительно нормы члена ухода
    max_iter: int = 500
    mu_floor: float = 1e-12

    # Выполнение
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        """Проверка инвариантов; нарушение - ConfigError."""
        if not self.eps > 0:
            raise ConfigError(f"eps должен быть > 0, получено {self.eps}")
        if not 0.0 <= self.a_exp < 0.5:
            raise ConfigError(f"a_exp должен лежать в [0, 1/2), получено {self.a_exp}")
        if not math.isclose(self.r_gas, 2.0 / 3.0, rel_tol=1e-12):
            raise ConfigError(f"r_gas зафиксирован равным 2/3, получено {self.r_gas}")
        if self.n_b != 1.0:
            raise ConfigError(f"n_b зафиксирован равным 1, получено {self.n_b}")
        if self.n_v <= 0 or self.n_v % 2:
            raise ConfigError(f"n_v должно быть четным положительным, получено {self.n_v}")
        if self.n_x < 4 or self.n_x & (self.n_x - 1):
            raise ConfigError(f"n_x должно быть степенью двойки, получено {self.n_x}")
        if self.n_sobolev < 1:
            raise ConfigError(f"n_sobolev должно быть >= 1, получено {self.n_sobolev}")
        if self.l_v <= 0 or self.l_x <= 0 or self.dt <= 0 or self.t_end <= 0:
            raise ConfigError("l_v, l_x, dt и t_end должны быть положительны")
        if self.kernel_mode not in ("direct", "fast"):
            raise ConfigError(f"kernel_mode должен быть 'direct' или 'fast', получено {self.kernel_mode!r}")
        if self.angular_rule not in ("gauss", "lebedev"):
            raise ConfigError(f"angular_rule должен быть 'gauss' или 'lebedev', получено {self.angular_rule!r}")
        if self.snapshot_every < 1:
            raise ConfigError("snapshot_every должно быть >= 1")

    def replace(self, **changes) -> "RunConfig":
        """Копия конфигурации с измененными полями (с повторной проверкой)."""
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        """SHA-256 отсортированного дампа key=value."""
        lines = [f"{key}={value!r}" for key, value in sorted(self.to_dict().items())]
        return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()

    def velocity_grid(self):
        from ..core.grids import VelocityGrid
        grid = VelocityGrid(self.n_v, self.l_v)
        grid.check_calibration(self.tol_quad)
        return grid

    def spatial_grid(self):
        from ..core.grids import SpatialGrid
        return SpatialGrid(self.n_x, self.l_x)


_FIELD_TYPES = {field.name: field.type for field in dataclasses.fields(RunConfig)}

# Ключи плана eps-сканирования, которых нет в RunConfig
SWEEP_DEFAULTS: Dict[str, Any] = {
    "eps_list": [0.2, 0.1, 0.05, 0.025],
    "parallel_runs": 1,
}


def find_config_file() -> Optional[str]:
    """Поиск файла конфигурации в стандартных местах."""
    search_paths = [
        # 1. Текущая рабочая директория
        os.path.join(os.getcwd(), CONFIG_FILE_NAME),
        # 2. XDG config directory
        os.path.expanduser(f"~/.config/kinetic-limit/{CONFIG_FILE_NAME}"),
        # 3. Домашний каталог
        os.path.expanduser(f"~/{CONFIG_FILE_NAME}"),
    ]
    for config_file in search_paths:
        if os.path.exists(config_file):
            return config_file
    return None


def load_config_file(config_file: Optional[str] = None) -> Dict[str, str]:
    """Чтение плоского файла key=value; комментарии '#' и пустые строки пропускаются."""
    if config_file is None:
        config_file = find_config_file()
        if config_file is None:
            logger.info("Файл конфигурации не найден, используются значения по умолчанию")
            return {}
    if not os.path.exists(config_file):
        raise ConfigError(f"Файл конфигурации не найден: {config_file}")

    logger.info(f"Загрузка конфигурации из: {config_file}")
    values: Dict[str, str] = {}
    with open(config_file, 'r', encoding='utf-8') as f:
        for number, line in enumerate(f, start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ConfigError(f"{config_file}:{number}: ожидается строка вида key=value")
            key, value = line.split('=', 1)
            values[key.strip()] = value.strip()
            logger.debug(f"  {key.strip()}={value.strip()}")
    return values


class EnvConfig:
    """Класс для сборки конфигурации из значений по умолчанию, файла и окружения."""

    def __init__(self, config_file: Optional[str] = None, environ: Optional[Mapping[str, str]] = None,
                 search: bool = True):
        self._environ = os.environ if environ is None else environ
        if config_file is None and not search:
            self._file_values: Dict[str, str] = {}
        else:
            self._file_values = load_config_file(config_file)
        unknown = set(self._file_values) - set(_FIELD_TYPES) - set(SWEEP_DEFAULTS)
        if unknown:
            raise ConfigError(f"Неизвестные ключи конфигурации: {', '.join(sorted(unknown))}")
        self.config = self._load_config()

    def _raw(self, key: str) -> Optional[str]:
        """Сырое значение: окружение важнее файла."""
        env_value = self._environ.get(ENV_PREFIX + key.upper())
        if env_value is not None:
            return env_value
        return self._file_values.get(key)

    def _load_config(self) -> Dict[str, Any]:
        defaults = RunConfig()
        config: Dict[str, Any] = {}
        for key, field_type in _FIELD_TYPES.items():
            default = getattr(defaults, key)
            if field_type in (int, "int"):
                config[key] = self._get_int(key, default)
            elif field_type in (float, "float"):
                config[key] = self._get_float(key, default)
            elif field_type in (bool, "bool"):
                config[key] = self._get_bool(key, default)
            else:
                config[key] = self._get_str(key, default)
        config["eps_list"] = self._get_float_list("eps_list", SWEEP_DEFAULTS["eps_list"])
        config["parallel_runs"] = self._get_int("parallel_runs", SWEEP_DEFAULTS["parallel_runs"])
        return config

    def _get_str(self, key: str, default: str) -> str:
        value = self._raw(key)
        return default if value is None else value

    def _get_int(self, key: str, default: int) -> int:
        value = self._raw(key)
        if value is None:
            return default
        try:
            return int(value)
        except ValueError:
            logger.warning(f"Предупреждение: Неверное значение для {key}={value!r}, используется значение по умолчанию: {default}")
            return default

    def _get_float(self, key: str, default: float) -> float:
        value = self._raw(key)
        if value is None:
            return default
        try:
            # Допускаем дроби вида 2/3
            if '/' in value:
                numerator, denominator = value.split('/', 1)
                return float(numerator) / float(denominator)
            return float(value)
        except (ValueError, ZeroDivisionError):
            logger.warning(f"Предупреждение: Неверное значение для {key}={value!r}, используется значение по умолчанию: {default}")
            return default

    def _get_bool(self, key: str, default: bool) -> bool:
        value = self._raw(key)
        if value is None:
            return default
        value_lower = value.lower()
        if value_lower in ('true', '1', 'yes', 'on'):
            return True
        if value_lower in ('false', '0', 'no', 'off'):
            return False
        logger.warning(f"Предупреждение: Неверное значение для {key}={value!r}, используется значение по умолчанию: {default}")
        return default

    def _get_float_list(self, key: str, default: List[float]) -> List[float]:
        value = self._raw(key)
        if value is None:
            return list(default)
        try:
            return [float(item) for item in value.replace(';', ',').split(',') if item.strip()]
        except ValueError:
            logger.warning(f"Предупреждение: Неверное значение для {key}={value!r}, используется значение по умолчанию: {default}")
            return list(default)

    def get(self, key: str, default=None):
        """Получение значения параметра."""
        return self.config.get(key, default)

    def update(self, key: str, value: Any):
        """Обновление значения параметра (например, из флагов CLI)."""
        if value is not None:
            self.config[key] = value

    def to_dict(self) -> Dict[str, Any]:
        return self.config.copy()

    def run_config(self) -> RunConfig:
        """Сборка проверенного RunConfig."""
        values = {key: self.config[key] for key in _FIELD_TYPES}
        return RunConfig(**values)

    def sweep_settings(self) -> Tuple[List[float], int]:
        return list(self.config["eps_list"]), int(self.config["parallel_runs"])


def log_configuration(config: RunConfig, log: Optional[logging.Logger] = None):
    """Подробное логирование конфигурации запуска."""
    log = log or logger
    log.info("KINETIC LIMIT CONFIGURATION")
    log.info("=" * 50)

    log.info("GRID SETTINGS:")
    log.info(f"  Velocity: n_v={config.n_v}, l_v={config.l_v}")
    log.info(f"  Space: n_x={config.n_x}, l_x={config.l_x}")

    log.info("KERNEL SETTINGS:")
    log.info(f"  Mode: {config.kernel_mode}")
    if config.angular_rule == "lebedev":
        log.info(f"  Angular rule: lebedev, order {config.lebedev_order}")
    else:
        log.info(f"  Angular rule: gauss, {config.n_theta} x {config.n_phi}")
    radius = "auto" if config.truncation_radius <= 0 else config.truncation_radius
    log.info(f"  Truncation Radius: {radius}")
    log.info(f"  Moment Fix: {'Enabled' if config.moment_fix else 'Disabled'}")
    log.info(f"  Build Check: {'Enabled' if config.kernel_check else 'Disabled'}")

    log.info("RUN SETTINGS:")
    log.info(f"  eps={config.eps}, eta0={config.eta0}, a={config.a_exp}, N={config.n_sobolev}")
    log.info(f"  dt={config.dt}, t_end={config.t_end}, snapshot_every={config.snapshot_every}")
    log.info(f"  beta_factor={config.beta_factor}, cfl={config.cfl}")

    log.info("TOLERANCE SETTINGS:")
    log.info(f"  tol_quad={config.tol_quad}, tol_micro={config.tol_micro}, tol_gram={config.tol_gram}")
    log.info(f"  tol_solve={config.tol_solve}, tol_fix={config.tol_fix}, max_iter={config.max_iter}")
    log.info(f"  tol_inv={config.tol_inv}, tol_cross={config.tol_cross}")

    log.info(f"  Config Hash: {config.config_hash()[:16]}")
    log.info("=" * 50)
