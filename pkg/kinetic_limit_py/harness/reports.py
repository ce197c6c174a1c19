"""
CSV-отчеты запусков.

Схемы столбцов зафиксированы ниже; вещественные числа пишутся как '%.17e'.
Перед таблицей идут строки комментариев '# ключ: значение' (хэш конфигурации,
режим ядра, допуски). Файлы записываются атомарно.
"""

import csv
import io
import logging
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

from .env_config import RunConfig
from .snapshot_io import atomic_write_bytes

logger = logging.getLogger('Reports')

FLOAT_FORMAT = "%.17e"

# Единицы безразмерные: время в единицах t, длины в единицах l_x
TIME_SERIES_COLUMNS = (
    "t", "mass", "energy", "momentum", "gauss_e", "gauss_b", "micro_norm", "min_f",
    "limit_l2", "limit_linf_x", "field_l2", "field_linf", "e_n", "d_n",
)
FLUID_SERIES_COLUMNS = ("t", "mass", "energy", "gauss_e", "gauss_b", "tail", "isentropic_defect")
TRANSPORT_COLUMNS = ("rho", "u1", "u2", "u3", "theta", "mu", "kappa", "mu_spread", "kappa_spread", "residual",
                     "consistent")
IDENTITY_COLUMNS = ("rho", "u1", "theta", "bullet", "description", "lhs", "rhs", "defect", "passed")
COERCIVITY_COLUMNS = ("n_v", "dimension", "c1", "asymmetry", "c2", "c_const", "fit_residual")
COMPARE_COLUMNS = ("t", "limit_l2", "limit_linf_x", "field_l2", "field_linf", "e_n", "d_n", "theta_residual")
SWEEP_COLUMNS = (
    "eps", "status", "sup_limit_l2", "sup_limit_linf_x", "sup_field_l2", "sup_field_linf",
    "sup_micro_norm", "t_max_reference", "scaling_audit", "steps",
)
SWEEP_SUMMARY_COLUMNS = ("norm", "slope", "intercept", "r2", "target", "rejected")


def report_metadata(config: RunConfig, **extra) -> Dict[str, Any]:
    """Обязательный заголовок отчета: хэш, ядро, допуски."""
    meta: Dict[str, Any] = {
        "config_hash": config.config_hash(),
        "kernel_mode": config.kernel_mode,
        "angular_rule": config.angular_rule,
        "tol_quad": config.tol_quad,
        "tol_micro": config.tol_micro,
        "tol_gram": config.tol_gram,
        "tol_solve": config.tol_solve,
        "tol_fix": config.tol_fix,
        "tol_cross": config.tol_cross,
    }
    meta.update(extra)
    return meta


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    if value is None:
        return ""
    return str(value)


def render_csv(columns: Sequence[str], rows: Iterable[Mapping[str, Any]],
               metadata: Optional[Mapping[str, Any]] = None) -> str:
    """Текст CSV; отсутствующие значения - пустые ячейки, лишние ключи отбрасываются."""
    buffer = io.StringIO()
    for key, value in (metadata or {}).items():
        buffer.write(f"# {key}: {_format(value)}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format(row.get(column)) for column in columns])
    return buffer.getvalue()


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Mapping[str, Any]],
              metadata: Optional[Mapping[str, Any]] = None):
    rows = list(rows)
    atomic_write_bytes(path, render_csv(columns, rows, metadata).encode("utf-8"))
    logger.info(f"Отчет записан: {path} ({len(rows)} строк)")


def read_csv(path: str) -> Dict[str, Any]:
    """Обратное чтение: {'metadata': {...}, 'rows': [{столбец: строка}]}."""
    metadata: Dict[str, str] = {}
    lines: List[str] = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.startswith("# "):
                key, _, value = line[2:].rstrip("\n").partition(": ")
                metadata[key] = value
            else:
                lines.append(line)
    return {"metadata": metadata, "rows": list(csv.DictReader(lines))}


def identity_rows(moments, entries) -> List[Dict[str, Any]]:
    return [{
        "rho": float(moments.rho), "u1": float(moments.u[0]), "theta": float(moments.theta),
        "bullet": entry.bullet, "description": entry.description, "lhs": float(entry.lhs),
        "rhs": float(entry.rhs), "defect": float(entry.defect), "passed": bool(entry.passed),
    } for entry in entries]


def transport_row(moments, coeffs) -> Dict[str, Any]:
    return {
        "rho": float(moments.rho), "u1": float(moments.u[0]), "u2": float(moments.u[1]),
        "u3": float(moments.u[2]), "theta": float(coeffs.theta), "mu": float(coeffs.mu_theta),
        "kappa": float(coeffs.kappa_theta), "mu_spread": float(coeffs.mu_spread),
        "kappa_spread": float(coeffs.kappa_spread), "residual": float(coeffs.residual),
        "consistent": bool(coeffs.consistent),
    }


def coercivity_row(n_v: int, report) -> Dict[str, Any]:
    return {
        "n_v": n_v, "dimension": report.dimension, "c1": float(report.c1), "asymmetry": float(report.asymmetry),
        "c2": float(report.c2), "c_const": float(report.c_const), "fit_residual": float(report.fit_residual),
    }
