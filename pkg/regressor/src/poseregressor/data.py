"""Dataset handling: PGM projections plus cue labels, letterboxing, augmentation.

Only files cross the boundary to the registration toolkit: 16-bit PGM images
with JSON sidecars, and truth/cue JSON. Nothing here imports that package.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass

import numpy as np
import torch

TRAIN_SIZE = 96
AUG_MAX_ROT = math.radians(15.0)

KIND_DEPTH = "depth"
KIND_MIP = "mip"
PAD_VALUE = {KIND_DEPTH: 1.0, KIND_MIP: 0.0}  # depth background is far, MIP is dark


def load_pgm(path):
    """16-bit (or 8-bit) binary PGM -> float array in [0, 1], plus sidecar."""
    with open(path, "rb") as fh:
        data = fh.read()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not m:
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = int(m.group(1)), int(m.group(2)), int(m.group(3))
    dtype = ">u2" if maxval == 65535 else np.uint8
    arr = np.frombuffer(data, dtype=dtype, count=w * h, offset=m.end())
    img = arr.reshape(h, w).astype(np.float32) / maxval
    sidecar = {}
    side_path = os.path.splitext(str(path))[0] + ".json"
    if os.path.exists(side_path):
        with open(side_path) as fh:
            sidecar = json.load(fh)
    return img, sidecar


def fold_axis_angle(a: float) -> float:
    """Fold any angle to the axis-valued range (-pi/2, pi/2]."""
    a = math.fmod(a, math.pi)
    if a > math.pi / 2:
        a -= math.pi
    elif a <= -math.pi / 2:
        a += math.pi
    return a


def encode_angle(a: float) -> tuple:
    """Axis angle -> (sin 2a, cos 2a), immune to the pi wraparound."""
    return math.sin(2.0 * a), math.cos(2.0 * a)


def decode_angle(s: float, c: float) -> float:
    return fold_axis_angle(0.5 * math.atan2(s, c))


@dataclass
class Letterbox:
    """Mapping from original pixel coords to the square training frame."""

    scale: float
    dx: float
    dy: float

    def forward(self, p):
        return (p[0] * self.scale + self.dx, p[1] * self.scale + self.dy)

    def inverse(self, p):
        return ((p[0] - self.dx) / self.scale, (p[1] - self.dy) / self.scale)


def letterbox(img: np.ndarray, kind: str, size: int = TRAIN_SIZE):
    """Scale to fit and pad to size x size. Returns (image, Letterbox)."""
    h, w = img.shape
    s = size / max(h, w)
    nh, nw = max(1, round(h * s)), max(1, round(w * s))
    t = torch.from_numpy(np.ascontiguousarray(img))[None, None]
    resized = torch.nn.functional.interpolate(
        t, size=(nh, nw), mode="bilinear", align_corners=False)[0, 0].numpy()
    out = np.full((size, size), PAD_VALUE[kind], dtype=np.float32)
    dy = (size - nh) // 2
    dx = (size - nw) // 2
    out[dy:dy + nh, dx:dx + nw] = resized
    return out, Letterbox(s, dx, dy)


def rotate_image(img: np.ndarray, phi: float, kind: str) -> np.ndarray:
    """Rotate about the image center by phi (pixel-frame convention)."""
    h, w = img.shape
    t = torch.from_numpy(np.ascontiguousarray(img))[None, None]
    c, s = math.cos(phi), math.sin(phi)
    # grid_sample's normalized coords: the affine must be the inverse map.
    theta = torch.tensor([[c, s, 0.0], [-s, c, 0.0]], dtype=torch.float32)[None]
    grid = torch.nn.functional.affine_grid(theta, t.shape, align_corners=False)
    out = torch.nn.functional.grid_sample(
        t, grid, mode="bilinear", padding_mode="border", align_corners=False)
    return out[0, 0].numpy()


def rotate_point(p, center, phi):
    c, s = math.cos(phi), math.sin(phi)
    dx, dy = p[0] - center[0], p[1] - center[1]
    return (center[0] + c * dx - s * dy, center[1] + s * dx + c * dy)


@dataclass
class Sample:
    image: np.ndarray        # letterboxed, training resolution
    targets: np.ndarray      # depth: (x, y, sin, cos); mip: both jaws stacked
    box: Letterbox
    kind: str


def _depth_targets(cues, box):
    cue = next(c for c in cues if c["source"] == "model_depth")
    x, y = box.forward(cue["point_px"])
    s, c = encode_angle(fold_axis_angle(cue["angle_rad"]))
    return np.array([x / TRAIN_SIZE, y / TRAIN_SIZE, s, c], dtype=np.float32)


def _mip_targets(cues, box):
    out = []
    for source in ("ct_mip_upper", "ct_mip_lower"):
        cue = next(c for c in cues if c["source"] == source)
        x, y = box.forward(cue["point_px"])
        s, c = encode_angle(fold_axis_angle(cue["angle_rad"]))
        out.extend([x / TRAIN_SIZE, y / TRAIN_SIZE, s, c])
    return np.array(out, dtype=np.float32)


def load_sample(sample_dir: str, kind: str) -> Sample:
    """One phantom export -> letterboxed image + normalized targets."""
    with open(os.path.join(sample_dir, "truth.json")) as fh:
        truth = json.load(fh)
    img, _side = load_pgm(os.path.join(sample_dir, f"{kind}.pgm"))
    boxed, box = letterbox(img, kind)
    if kind == KIND_DEPTH:
        targets = _depth_targets(truth["cues"], box)
    else:
        targets = _mip_targets(truth["cues"], box)
    return Sample(boxed, targets, box, kind)


def augment(sample: Sample, rng: np.random.Generator) -> Sample:
    """Random in-plane rotation (+-15 deg) and intensity jitter."""
    phi = float(rng.uniform(-AUG_MAX_ROT, AUG_MAX_ROT))
    gain = float(rng.uniform(0.9, 1.1))
    offset = float(rng.uniform(-0.05, 0.05))
    img = rotate_image(sample.image, phi, sample.kind)
    img = np.clip(img * gain + offset, 0.0, 1.0).astype(np.float32)
    center = ((TRAIN_SIZE - 1) / 2.0, (TRAIN_SIZE - 1) / 2.0)
    t = sample.targets.copy()
    for k in range(0, len(t), 4):
        p = (t[k] * TRAIN_SIZE, t[k + 1] * TRAIN_SIZE)
        x, y = rotate_point(p, center, phi)
        angle = fold_axis_angle(decode_angle(t[k + 2], t[k + 3]) + phi)
        s, c = encode_angle(angle)
        t[k:k + 4] = [x / TRAIN_SIZE, y / TRAIN_SIZE, s, c]
    return Sample(img, t, sample.box, sample.kind)


def build_dataset(data_dir: str, kind: str, augment_per_sample: int = 7,
                  seed: int = 0):
    """Materialize base + augmented samples as tensors.

    Returns (images (n,1,S,S) float32, targets (n,d) float32, n_base).
    """
    with open(os.path.join(data_dir, "index.json")) as fh:
        index = json.load(fh)
    rng = np.random.default_rng(seed)
    images, targets = [], []
    for entry in index["samples"]:
        base = load_sample(os.path.join(data_dir, entry["dir"]), kind)
        images.append(base.image)
        targets.append(base.targets)
        for _ in range(augment_per_sample):
            aug = augment(base, rng)
            images.append(aug.image)
            targets.append(aug.targets)
    x = torch.from_numpy(np.stack(images))[:, None]
    y = torch.from_numpy(np.stack(targets))
    return x, y, len(index["samples"])
