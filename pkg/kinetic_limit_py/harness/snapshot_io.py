"""
Бинарные снимки состояний и таблиц ядра.

Формат файла:
    [magic 6 байт][версия uint32 LE][длина заголовка uint32 LE][JSON-заголовок]
    [массивы float64 построчно, в порядке заголовка][SHA-256 всего предыдущего, 32 байта]

Запись атомарная: временный файл в том же каталоге + os.replace.
"""

import hashlib
import json
import logging
import os
import struct
import tempfile
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..core.collision import CollisionKernel
from ..core.grids import SpatialGrid, VelocityGrid
from ..errors import ConfigError, CorruptFileError, SnapshotIOError
from ..solvers.em_fields import EMField
from ..solvers.fluid_solver import FluidState
from ..solvers.kinetic_solver import KineticState

logger = logging.getLogger('SnapshotIO')

MAGIC = b"KLSNAP"
FORMAT_VERSION = 1
_DIGEST_SIZE = 32
_PREFIX = struct.Struct('<II')


def atomic_write_bytes(path: str, payload: bytes):
    """Запись во временный файл рядом с path и переименование."""
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, temp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
        try:
            with os.fdopen(fd, 'wb') as f:
                f.write(payload)
            os.replace(temp_path, path)
        except BaseException:
            if os.path.exists(temp_path):
                os.unlink(temp_path)
            raise
    except OSError as e:
        raise SnapshotIOError(f"Не удалось записать {path}: {e}") from e


def write_snapshot(path: str, kind: str, arrays: Dict[str, np.ndarray], meta: Optional[Dict[str, Any]] = None):
    """Сохранение словаря массивов float64 с заголовком."""
    specs = []
    chunks = []
    for name, array in arrays.items():
        data = np.ascontiguousarray(array, dtype='<f8')
        specs.append({"name": name, "shape": list(data.shape)})
        chunks.append(data.tobytes(order='C'))
    header = {"kind": kind, "arrays": specs}
    header.update(meta or {})
    header_bytes = json.dumps(header, sort_keys=True).encode('utf-8')
    body = MAGIC + _PREFIX.pack(FORMAT_VERSION, len(header_bytes)) + header_bytes + b"".join(chunks)
    atomic_write_bytes(path, body + hashlib.sha256(body).digest())
    logger.debug(f"Снимок {kind} записан: {path} ({len(body)} байт)")


def read_snapshot(path: str, expected_kind: Optional[str] = None) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """Чтение и проверка снимка; при любой ошибке состояние не возвращается."""
    try:
        with open(path, 'rb') as f:
            raw = f.read()
    except OSError as e:
        raise SnapshotIOError(f"Не удалось прочитать {path}: {e}") from e

    minimum = len(MAGIC) + _PREFIX.size + _DIGEST_SIZE
    if len(raw) < minimum or not raw.startswith(MAGIC):
        raise CorruptFileError(f"{path}: неверная сигнатура или файл обрезан")
    body, digest = raw[:-_DIGEST_SIZE], raw[-_DIGEST_SIZE:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptFileError(f"{path}: контрольная сумма не совпала")
    version, header_length = _PREFIX.unpack_from(raw, len(MAGIC))
    if version != FORMAT_VERSION:
        raise SnapshotIOError(f"{path}: версия формата {version}, поддерживается {FORMAT_VERSION}")

    offset = len(MAGIC) + _PREFIX.size
    try:
        header = json.loads(body[offset:offset + header_length].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptFileError(f"{path}: поврежденный заголовок") from e
    offset += header_length

    if expected_kind is not None and header.get("kind") != expected_kind:
        raise SnapshotIOError(f"{path}: ожидался снимок '{expected_kind}', найден '{header.get('kind')}'")

    arrays: Dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape, dtype=np.int64)) * 8
        if offset + size > len(body):
            raise CorruptFileError(f"{path}: размер данных не соответствует заголовку")
        arrays[entry["name"]] = np.frombuffer(body, dtype='<f8', count=size // 8, offset=offset).reshape(shape).copy()
        offset += size
    if offset != len(body):
        raise CorruptFileError(f"{path}: лишние байты после массивов")
    return header, arrays


def _grid_meta(vgrid: Optional[VelocityGrid], sgrid: Optional[SpatialGrid]) -> Dict[str, Any]:
    grids: Dict[str, Any] = {}
    if vgrid is not None:
        grids.update(n_v=vgrid.n_v, l_v=vgrid.l_v)
    if sgrid is not None:
        grids.update(n_x=sgrid.n_x, l_x=sgrid.l_x)
    return {"grids": grids}


def _check_grids(path: str, header: Dict[str, Any], vgrid: Optional[VelocityGrid], sgrid: Optional[SpatialGrid]):
    grids = header.get("grids", {})
    expected = _grid_meta(vgrid, sgrid)["grids"]
    mismatched = {key: (grids.get(key), value) for key, value in expected.items() if grids.get(key) != value}
    if mismatched:
        details = ", ".join(f"{key}: файл {have}, запуск {want}" for key, (have, want) in mismatched.items())
        raise ConfigError(f"{path}: сетка снимка не совпадает с запуском ({details})")


def save_kinetic(path: str, state: KineticState, vgrid: VelocityGrid, sgrid: SpatialGrid, eps: float):
    meta = _grid_meta(vgrid, sgrid)
    meta.update(t=float(state.t), eps=float(eps))
    write_snapshot(path, "kinetic", {"F": state.F, "E": state.em.E, "B": state.em.B}, meta)


def load_kinetic(path: str, vgrid: Optional[VelocityGrid] = None,
                 sgrid: Optional[SpatialGrid] = None) -> Tuple[KineticState, float]:
    """(состояние, eps); несовпадение сеток с запрошенными - ConfigError."""
    header, arrays = read_snapshot(path, "kinetic")
    _check_grids(path, header, vgrid, sgrid)
    state = KineticState(arrays["F"], EMField(arrays["E"], arrays["B"]), float(header["t"]))
    return state, float(header["eps"])


def save_fluid(path: str, state: FluidState, sgrid: SpatialGrid, isentropic: bool = False):
    meta = _grid_meta(None, sgrid)
    meta.update(t=float(state.t), isentropic=bool(isentropic))
    write_snapshot(path, "fluid", {"rho": state.rho, "u": state.u, "theta": state.theta,
                                   "E": state.em.E, "B": state.em.B}, meta)


def load_fluid(path: str, sgrid: Optional[SpatialGrid] = None) -> FluidState:
    header, arrays = read_snapshot(path, "fluid")
    _check_grids(path, header, None, sgrid)
    return FluidState(arrays["rho"], arrays["u"], arrays["theta"], EMField(arrays["E"], arrays["B"]),
                      float(header["t"]))


def save_kernel(path: str, kernel: CollisionKernel):
    meta = _grid_meta(kernel.vgrid, None)
    meta.update(kernel=kernel.header())
    write_snapshot(path, "kernel", kernel.table_arrays(), meta)
    logger.info(f"Таблицы ядра сохранены: {path}")


def load_kernel(path: str, vgrid: VelocityGrid, threads: int = 1) -> CollisionKernel:
    header, arrays = read_snapshot(path, "kernel")
    _check_grids(path, header, vgrid, None)
    logger.info(f"Таблицы ядра загружены: {path}")
    return CollisionKernel.from_tables(vgrid, header["kernel"], arrays, threads=threads)
