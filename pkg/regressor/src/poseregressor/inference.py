"""Inference: projection image in, pose-cue JSON out (the registration schema)."""

from __future__ import annotations

import json
import math
import os

import numpy as np
import torch

from .data import (KIND_DEPTH, KIND_MIP, TRAIN_SIZE, decode_angle, letterbox,
                   load_pgm)
from .training import load_model


def predict_cues(model, image: np.ndarray, kind: str):
    """Run the net on one original-resolution image.

    Returns a list of (point_xy_original_px, axis_angle_rad) tuples: one for
    depth images, two (upper then lower) for MIP images.
    """
    boxed, box = letterbox(image, kind)
    with torch.no_grad():
        pred = model(torch.from_numpy(boxed)[None, None])[0].numpy()
    cues = []
    for k in range(len(pred) // 4):
        x, y, s, c = pred[4 * k:4 * k + 4]
        px = box.inverse((float(x) * TRAIN_SIZE, float(y) * TRAIN_SIZE))
        cues.append((px, decode_angle(float(s), float(c))))
    return cues


def infer_to_json(model_dir: str, image_path: str, kind: str, out_path: str):
    """Emit the pose-cue JSON consumed by the registration CLI unchanged."""
    if kind not in (KIND_DEPTH, KIND_MIP):
        raise ValueError(f"kind must be depth or mip, got {kind!r}")
    model, meta = load_model(model_dir, kind)
    image, sidecar = load_pgm(image_path)
    cues = predict_cues(model, image, kind)
    if kind == KIND_DEPTH:
        records = [{"source": "model_depth",
                    "point_px": [cues[0][0][0], cues[0][0][1]],
                    "angle_rad": cues[0][1]}]
    else:
        records = [
            {"source": "ct_mip_upper", "point_px": list(cues[0][0]),
             "angle_rad": cues[0][1]},
            {"source": "ct_mip_lower", "point_px": list(cues[1][0]),
             "angle_rad": cues[1][1]},
        ]
    doc = {"cues": records, "image_ref": str(image_path),
           "inference": {"train_size": meta["train_size"], "model_dir": str(model_dir)}}
    if kind == KIND_DEPTH and sidecar.get("frame"):
        doc["frame"] = sidecar["frame"]
    with open(out_path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return doc
