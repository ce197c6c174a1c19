"""
Тесты бинарных снимков: побитовое восстановление, повреждения, версии, сетки, таблицы ядра.
"""

import hashlib
import struct

import numpy as np
import pytest

from kinetic_limit_py.core.grids import SpatialGrid, VelocityGrid
from kinetic_limit_py.errors import ConfigError, CorruptFileError, SnapshotIOError
from kinetic_limit_py.harness.snapshot_io import (MAGIC, load_fluid, load_kernel, load_kinetic, read_snapshot,
                                                  save_fluid, save_kernel, save_kinetic, write_snapshot)
from kinetic_limit_py.harness.sweep import prepare_well_prepared


@pytest.fixture
def snapshot_pair(small_config):
    return prepare_well_prepared(small_config)


def test_kinetic_round_trip_is_bit_exact(tmp_path, snapshot_pair, small_config):
    kinetic, _ = snapshot_pair
    path = str(tmp_path / "state.snap")
    vgrid, sgrid = small_config.velocity_grid(), small_config.spatial_grid()
    save_kinetic(path, kinetic, vgrid, sgrid, eps=0.1)
    restored, eps = load_kinetic(path, vgrid, sgrid)
    assert eps == 0.1
    assert restored.t == kinetic.t
    np.testing.assert_array_equal(restored.F, kinetic.F)
    np.testing.assert_array_equal(restored.em.E, kinetic.em.E)
    np.testing.assert_array_equal(restored.em.B, kinetic.em.B)


def test_fluid_round_trip(tmp_path, snapshot_pair, small_config):
    _, fluid = snapshot_pair
    path = str(tmp_path / "fluid.snap")
    save_fluid(path, fluid, small_config.spatial_grid(), isentropic=True)
    restored = load_fluid(path, small_config.spatial_grid())
    np.testing.assert_array_equal(restored.rho, fluid.rho)
    np.testing.assert_array_equal(restored.theta, fluid.theta)
    header, _ = read_snapshot(path)
    assert header["kind"] == "fluid"
    assert header["isentropic"] is True


@pytest.fixture
def written(tmp_path):
    path = tmp_path / "data.snap"
    write_snapshot(str(path), "test", {"a": np.arange(12.0).reshape(3, 4)}, {"note": "проверка"})
    return path


def test_truncated_file(written):
    raw = written.read_bytes()
    written.write_bytes(raw[:-40])
    with pytest.raises(CorruptFileError):
        read_snapshot(str(written))


def test_flipped_byte(written):
    raw = bytearray(written.read_bytes())
    raw[len(raw) // 2] ^= 0xFF
    written.write_bytes(bytes(raw))
    with pytest.raises(CorruptFileError):
        read_snapshot(str(written))


def test_wrong_magic(written):
    raw = written.read_bytes()
    written.write_bytes(b"XXXXXX" + raw[len(MAGIC):])
    with pytest.raises(CorruptFileError):
        read_snapshot(str(written))


def test_unsupported_version_with_valid_checksum(written):
    raw = written.read_bytes()
    body = bytearray(raw[:-32])
    struct.pack_into('<I', body, len(MAGIC), 99)
    written.write_bytes(bytes(body) + hashlib.sha256(bytes(body)).digest())
    with pytest.raises(SnapshotIOError) as info:
        read_snapshot(str(written))
    assert not isinstance(info.value, CorruptFileError)


def test_wrong_kind(written):
    with pytest.raises(SnapshotIOError):
        read_snapshot(str(written), expected_kind="kinetic")


def test_missing_file(tmp_path):
    with pytest.raises(SnapshotIOError):
        read_snapshot(str(tmp_path / "absent.snap"))


def test_grid_mismatch(tmp_path, snapshot_pair, small_config):
    kinetic, _ = snapshot_pair
    path = str(tmp_path / "state.snap")
    save_kinetic(path, kinetic, small_config.velocity_grid(), small_config.spatial_grid(), eps=0.1)
    with pytest.raises(ConfigError):
        load_kinetic(path, VelocityGrid(8, 6.0), small_config.spatial_grid())
    with pytest.raises(ConfigError):
        load_kinetic(path, small_config.velocity_grid(), SpatialGrid(16, 1.0))


def test_no_temporary_files_left(tmp_path, written):
    assert sorted(p.name for p in tmp_path.iterdir()) == ["data.snap"]


def test_kernel_tables_round_trip(tmp_path, fast8, rng):
    path = str(tmp_path / "kernel.snap")
    save_kernel(path, fast8)
    restored = load_kernel(path, fast8.vgrid)
    assert restored.rank == fast8.rank
    F = fast8.vgrid.global_maxwellian() * (1.0 + 0.1 * rng.standard_normal(fast8.vgrid.shape))
    np.testing.assert_array_equal(restored.q(F, F), fast8.q(F, F))
    with pytest.raises(ConfigError):
        load_kernel(path, VelocityGrid(12, 6.0))
