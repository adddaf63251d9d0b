"""Atomic writes: the visible file is always complete."""

import pytest

from gabordefect.fsio import atomic_write_bytes, atomic_write_text


def test_write_and_replace(tmp_path):
    p = tmp_path / "f.bin"
    atomic_write_bytes(p, b"one")
    assert p.read_bytes() == b"one"
    atomic_write_bytes(p, b"two")
    assert p.read_bytes() == b"two"


def test_no_temp_files_left(tmp_path):
    for i in range(3):
        atomic_write_bytes(tmp_path / "f.bin", bytes([i]))
    assert [p.name for p in tmp_path.iterdir()] == ["f.bin"]


def test_text_is_utf8(tmp_path):
    p = tmp_path / "t.txt"
    atomic_write_text(p, "café\n")
    assert p.read_bytes() == b"caf\xc3\xa9\n"


def test_missing_directory_raises_cleanly(tmp_path):
    target = tmp_path / "absent" / "f.bin"
    with pytest.raises(OSError):
        atomic_write_bytes(target, b"x")
    assert not (tmp_path / "absent").exists()
