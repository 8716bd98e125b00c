"""On-disk formats: volume header+raw pairs and 16-bit PGM images with JSON sidecars."""

from __future__ import annotations

import json
import os
import re

import numpy as np

from .errors import InputError
from .volume import CtVolume, Image2D

AXIS_CONVENTION = "x=left-right, y=anterior+, z=superior+"


def save_volume(header_path, vol: CtVolume, data_path=None) -> None:
    """Write a text header plus raw little-endian f32 voxels, x-fastest."""
    header_path = str(header_path)
    if data_path is None:
        data_path = os.path.splitext(header_path)[0] + ".raw"
    nx, ny, nz = vol.dims
    # x-fastest flat order: transpose so the last (fastest C) axis is x
    flat = np.ascontiguousarray(vol.data.transpose(2, 1, 0), dtype="<f4")
    with open(data_path, "wb") as fh:
        fh.write(flat.tobytes())
    with open(header_path, "w") as fh:
        fh.write(f"dims: {nx} {ny} {nz}\n")
        fh.write(f"spacing: {vol.spacing[0]:.9g} {vol.spacing[1]:.9g} {vol.spacing[2]:.9g}\n")
        fh.write(f"origin: {vol.origin[0]:.9g} {vol.origin[1]:.9g} {vol.origin[2]:.9g}\n")
        fh.write("data_type: f32\n")
        fh.write("byte_order: little\n")
        fh.write(f"data_file: {os.path.basename(data_path)}\n")
        fh.write(f"axis_convention: {AXIS_CONVENTION}\n")


def load_volume(header_path) -> CtVolume:
    header_path = str(header_path)
    try:
        with open(header_path, "r") as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise InputError(f"{header_path}: cannot read volume header: {e}") from e
    kv = {}
    for line in lines:
        if ":" in line:
            k, v = line.split(":", 1)
            kv[k.strip()] = v.strip()
    for key in ("dims", "spacing", "origin", "data_type", "byte_order"):
        if key not in kv:
            raise InputError(f"{header_path}: missing header field '{key}'")
    if kv["data_type"] != "f32":
        raise InputError(f"{header_path}: field 'data_type' must be f32, got {kv['data_type']}")
    if kv["byte_order"] != "little":
        raise InputError(f"{header_path}: field 'byte_order' must be little")
    try:
        nx, ny, nz = (int(x) for x in kv["dims"].split())
        spacing = [float(x) for x in kv["spacing"].split()]
        origin = [float(x) for x in kv["origin"].split()]
    except ValueError as e:
        raise InputError(f"{header_path}: malformed numeric field: {e}") from e
    if len(spacing) != 3 or len(origin) != 3:
        raise InputError(f"{header_path}: 'spacing' and 'origin' need 3 values")
    data_file = kv.get("data_file", os.path.basename(os.path.splitext(header_path)[0]) + ".raw")
    data_path = os.path.join(os.path.dirname(header_path) or ".", data_file)
    try:
        flat = np.fromfile(data_path, dtype="<f4")
    except OSError as e:
        raise InputError(f"{data_path}: cannot read voxel data: {e}") from e
    if flat.size != nx * ny * nz:
        raise InputError(
            f"{data_path}: field 'dims' promises {nx * ny * nz} voxels, file has {flat.size}")
    data = flat.reshape(nz, ny, nx).transpose(2, 1, 0)
    return CtVolume(data, spacing, origin)


# ---------------------------------------------------------------------------
# 16-bit PGM + JSON sidecar

def _sidecar_path(pgm_path) -> str:
    return os.path.splitext(str(pgm_path))[0] + ".json"


def save_image_pgm(path, img: Image2D, meta: dict | None = None) -> None:
    """16-bit binary PGM (values scaled from [0,1]) plus a JSON sidecar."""
    vals = np.clip(img.values, 0.0, 1.0)
    pix = np.round(vals * 65535.0).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.width} {img.height}\n65535\n".encode("ascii"))
        fh.write(pix.tobytes())
    sidecar = {"pixel_size_mm": img.pixel_size, "width": img.width, "height": img.height}
    if meta:
        sidecar.update(meta)
    with open(_sidecar_path(path), "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")


def load_image_pgm(path):
    """Read a PGM written by save_image_pgm. Returns (Image2D, sidecar dict)."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as e:
        raise InputError(f"{path}: cannot read image: {e}") from e
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not m:
        raise InputError(f"{path}: not a binary PGM (P5) file")
    w, h, maxval = int(m.group(1)), int(m.group(2)), int(m.group(3))
    pixels = data[m.end():]
    if maxval == 65535:
        arr = np.frombuffer(pixels, dtype=">u2", count=w * h)
    elif maxval == 255:
        arr = np.frombuffer(pixels, dtype=np.uint8, count=w * h)
    else:
        raise InputError(f"{path}: unsupported PGM maxval {maxval}")
    vals = arr.reshape(h, w).astype(float) / maxval
    sidecar_file = _sidecar_path(path)
    meta = {}
    if os.path.exists(sidecar_file):
        with open(sidecar_file) as fh:
            meta = json.load(fh)
    pixel_size = float(meta.get("pixel_size_mm", 1.0))
    return Image2D(vals, pixel_size), meta
