"""
Иерархия исключений kinetic-limit-py.

Каждое исключение несет код выхода CLI:
2 - ошибка конфигурации, 3 - численный сбой, 4 - ошибка ввода/вывода.
"""

from typing import Any, Optional


class KineticLimitError(Exception):
    """Базовое исключение пакета."""

    exit_code = 1


class ConfigError(KineticLimitError):
    """Неверная конфигурация запуска или несовпадение сеток."""

    exit_code = 2


class PreconditionError(KineticLimitError, ValueError):
    """Входные данные операции нарушают ее предусловие."""

    exit_code = 2


class CFLViolationError(ConfigError):
    """Шаг по времени превышает допустимый по условию CFL."""

    def __init__(self, dt: float, admissible_dt: float):
        self.dt = dt
        self.admissible_dt = admissible_dt
        super().__init__(f"dt={dt:.6e} нарушает условие CFL, допустимый шаг: dt <= {admissible_dt:.6e}")


class NumericalError(KineticLimitError):
    """Численный сбой: вырожденное состояние, расходимость, потеря разрешения."""

    exit_code = 3


class DegenerateStateError(NumericalError):
    """Плотность или температура неположительны в ячейке."""

    def __init__(self, message: str, cell: Optional[int] = None):
        self.cell = cell
        if cell is not None:
            message = f"{message} (ячейка {cell})"
        super().__init__(message)


class CalibrationError(NumericalError):
    """Квадратура скоростной сетки не проходит калибровку."""


class CompatibilityError(NumericalError):
    """Условие совместности на торе нарушено (среднее 1 - rho не равно нулю)."""


class ConsistencyError(NumericalError):
    """Нарушено структурное тождество (например, отрицательный коэффициент переноса)."""


class SolverError(NumericalError):
    """Итерационный решатель не сошелся."""

    def __init__(self, message: str, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message}: невязка {residual:.3e} после {iterations} итераций")


class ResolutionLossError(NumericalError):
    """Энергия спектрального хвоста превысила допустимую долю."""


class BlowUpError(NumericalError):
    """Норма решения выросла более чем в 10^6 раз; содержит последний корректный снимок."""

    def __init__(self, message: str, last_snapshot: Any = None):
        self.last_snapshot = last_snapshot
        super().__init__(message)


class SnapshotIOError(KineticLimitError):
    """Ошибка чтения или записи файлов снимков и отчетов."""

    exit_code = 4


class CorruptFileError(SnapshotIOError):
    """Файл снимка поврежден: неверная сигнатура, обрезан или не совпала контрольная сумма."""
