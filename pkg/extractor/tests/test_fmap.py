import struct

import numpy as np
import pytest

from extractor.fmap import FORMAT_VERSION, MAGIC, GridFormatError, read_grid, write_grid


def test_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    grid = rng.normal(size=(4, 5, 6)).astype(np.float32)
    path = tmp_path / "g.fmap"
    write_grid(grid, path)
    assert np.array_equal(read_grid(path), grid)


def test_header_layout(tmp_path):
    grid = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
    path = tmp_path / "g.fmap"
    write_grid(grid, path)
    raw = path.read_bytes()
    magic, version, height, width, channels, reserved = struct.unpack("<4sIIIII", raw[:24])
    assert magic == MAGIC
    assert version == FORMAT_VERSION
    assert (height, width, channels) == (2, 3, 4)
    assert reserved == 0
    assert len(raw) == 24 + 4 * 24
    assert struct.unpack("<f", raw[24:28])[0] == 0.0
    assert struct.unpack("<f", raw[28:32])[0] == 1.0


def test_engine_reader_accepts_our_files(tmp_path):
    from collate.features import load_feature_map

    rng = np.random.default_rng(7)
    grid = rng.normal(size=(3, 2, 5)).astype(np.float32)
    path = tmp_path / "g.fmap"
    write_grid(grid, path)
    loaded = load_feature_map(path)
    assert np.array_equal(loaded.data, grid)


def test_our_reader_accepts_engine_files(tmp_path):
    from collate.features import FeatureMap, save_feature_map

    rng = np.random.default_rng(8)
    grid = rng.normal(size=(2, 4, 3)).astype(np.float32)
    path = tmp_path / "g.fmap"
    save_feature_map(FeatureMap(grid), path)
    assert np.array_equal(read_grid(path), grid)


def test_rejects_wrong_rank(tmp_path):
    with pytest.raises(GridFormatError):
        write_grid(np.zeros((3, 4)), tmp_path / "g.fmap")


def test_rejects_non_finite(tmp_path):
    grid = np.zeros((2, 2, 2), dtype=np.float32)
    grid[0, 0, 0] = np.nan
    with pytest.raises(GridFormatError):
        write_grid(grid, tmp_path / "g.fmap")


def test_rejects_truncated_payload(tmp_path):
    grid = np.ones((2, 2, 2), dtype=np.float32)
    path = tmp_path / "g.fmap"
    write_grid(grid, path)
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(GridFormatError, match="truncated"):
        read_grid(path)


def test_rejects_bad_magic(tmp_path):
    path = tmp_path / "g.fmap"
    path.write_bytes(b"NOPE" + b"\x00" * 40)
    with pytest.raises(GridFormatError, match="magic"):
        read_grid(path)
