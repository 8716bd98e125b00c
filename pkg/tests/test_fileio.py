import numpy as np
import pytest

from archreg.errors import InputError
from archreg.fileio import (load_image_pgm, load_volume, save_image_pgm,
                            save_volume)
from archreg.volume import CtVolume, Image2D


def test_volume_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.uniform(-100, 3000, (7, 6, 5)).astype(np.float32)
    vol = CtVolume(data, (0.4, 0.5, 0.6), (-3.0, 2.0, 1.5))
    path = tmp_path / "vol.hdr"
    save_volume(path, vol)
    back = load_volume(path)
    assert np.array_equal(back.data, vol.data)
    assert np.allclose(back.spacing, vol.spacing)
    assert np.allclose(back.origin, vol.origin)


def test_volume_raw_is_x_fastest(tmp_path):
    data = np.arange(2 * 3 * 4, dtype=np.float32).reshape(2, 3, 4)
    vol = CtVolume(data, (1, 1, 1), (0, 0, 0))
    save_volume(tmp_path / "v.hdr", vol)
    flat = np.fromfile(tmp_path / "v.raw", dtype="<f4")
    # flat[i + nx*(j + ny*k)] == data[i, j, k]
    assert flat[1 + 2 * (2 + 3 * 3)] == data[1, 2, 3]


def test_volume_header_missing_field(tmp_path):
    (tmp_path / "bad.hdr").write_text("dims: 2 2 2\nspacing: 1 1 1\n")
    with pytest.raises(InputError, match="origin"):
        load_volume(tmp_path / "bad.hdr")


def test_volume_size_mismatch(tmp_path):
    vol = CtVolume(np.zeros((2, 2, 2), dtype=np.float32), (1, 1, 1), (0, 0, 0))
    save_volume(tmp_path / "v.hdr", vol)
    (tmp_path / "v.raw").write_bytes(b"\0" * 4)
    with pytest.raises(InputError, match="dims"):
        load_volume(tmp_path / "v.hdr")


def test_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    img = Image2D(rng.uniform(0, 1, (9, 11)), pixel_size=0.25)
    save_image_pgm(tmp_path / "img.pgm", img, meta={"kind": "depth"})
    back, meta = load_image_pgm(tmp_path / "img.pgm")
    assert back.values.shape == (9, 11)
    assert meta["kind"] == "depth"
    assert meta["pixel_size_mm"] == 0.25
    assert back.pixel_size == 0.25
    assert np.abs(back.values - img.values).max() <= 0.5 / 65535 + 1e-12


def test_pgm_rejects_non_pgm(tmp_path):
    (tmp_path / "x.pgm").write_bytes(b"PNG nonsense")
    with pytest.raises(InputError):
        load_image_pgm(tmp_path / "x.pgm")
