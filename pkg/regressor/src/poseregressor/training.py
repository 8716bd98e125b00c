"""Training loop: Euclidean point loss, weighted angle loss, weight regularization."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, asdict

import numpy as np
import torch

from .data import TRAIN_SIZE, build_dataset, decode_angle
from .model import make_net

ALPHA = 0.1  # angle term weight
BETA = 0.1   # weight-norm term (applied to the mean squared weight)


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 64
    lr: float = 1e-3
    lr_decay: float = 0.1
    lr_step: int = 20
    alpha: float = ALPHA
    beta: float = BETA
    width: int = 12
    val_fraction: float = 0.15
    augment_per_sample: int = 7
    seed: int = 0


def pose_loss(pred, target, model, alpha: float, beta: float):
    """Per-batch mean of ||p - y1||2 + alpha ||theta_enc - y2||2, plus the
    weight-norm term scaled by parameter count so beta keeps the paper's
    magnitude at any network size."""
    n_cues = pred.shape[1] // 4
    point_loss = 0.0
    angle_loss = 0.0
    for k in range(n_cues):
        sl = slice(4 * k, 4 * k + 4)
        p = pred[:, sl]
        t = target[:, sl]
        point_loss = point_loss + torch.linalg.norm(p[:, :2] - t[:, :2], dim=1).mean()
        angle_loss = angle_loss + torch.linalg.norm(p[:, 2:] - t[:, 2:], dim=1).mean()
    sq_sum = 0.0
    n_weights = 0
    for name, w in model.named_parameters():
        if w.dim() > 1:  # weights only, not biases
            sq_sum = sq_sum + (w ** 2).sum()
            n_weights += w.numel()
    reg = sq_sum / n_weights
    return point_loss + alpha * angle_loss + beta * reg, point_loss, angle_loss


def cue_errors(pred: torch.Tensor, target: torch.Tensor, scale_px: float):
    """Point error (original-image pixels) and angle error (degrees)."""
    n_cues = pred.shape[1] // 4
    pts, angs = [], []
    for k in range(n_cues):
        sl = slice(4 * k, 4 * k + 4)
        p = pred[:, sl].detach().cpu().numpy()
        t = target[:, sl].detach().cpu().numpy()
        d_px = np.linalg.norm((p[:, :2] - t[:, :2]) * TRAIN_SIZE, axis=1) * scale_px
        pts.append(d_px)
        for row_p, row_t in zip(p, t):
            a_p = decode_angle(row_p[2], row_p[3])
            a_t = decode_angle(row_t[2], row_t[3])
            d = abs(a_p - a_t)
            angs.append(math.degrees(min(d, math.pi - d)))
    return np.concatenate(pts), np.array(angs)


def train_net(data_dir: str, kind: str, cfg: TrainConfig,
              log=print):
    """Train one network. Returns (model, metrics dict)."""
    torch.manual_seed(cfg.seed)
    x, y, n_base = build_dataset(data_dir, kind,
                                 augment_per_sample=cfg.augment_per_sample,
                                 seed=cfg.seed)
    # Split by base sample so augmented copies never leak across the split.
    group = cfg.augment_per_sample + 1
    rng = np.random.default_rng(cfg.seed + 1)
    base_order = rng.permutation(n_base)
    n_val_base = max(1, int(round(cfg.val_fraction * n_base)))
    val_bases = set(base_order[:n_val_base].tolist())
    idx = np.arange(len(x))
    is_val = np.isin(idx // group, list(val_bases))
    x_train, y_train = x[~is_val], y[~is_val]
    x_val, y_val = x[is_val], y[is_val]

    model = make_net(kind, width=cfg.width)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    sched = torch.optim.lr_scheduler.StepLR(opt, step_size=cfg.lr_step,
                                            gamma=cfg.lr_decay)
    n = len(x_train)
    epoch_losses = []
    gen = torch.Generator().manual_seed(cfg.seed + 2)
    for epoch in range(cfg.epochs):
        model.train()
        perm = torch.randperm(n, generator=gen)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            sel = perm[start:start + cfg.batch_size]
            pred = model(x_train[sel])
            loss, _pl, _al = pose_loss(pred, y_train[sel], model,
                                       cfg.alpha, cfg.beta)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += float(loss) * len(sel)
        sched.step()
        epoch_losses.append(total / n)
        if epoch % 10 == 0 or epoch == cfg.epochs - 1:
            log(f"[{kind}] epoch {epoch:3d}: train loss {epoch_losses[-1]:.4f}")

    model.eval()
    metrics = {"kind": kind, "epochs": cfg.epochs, "n_train": int(n),
               "n_val": int(len(x_val)), "epoch_losses": epoch_losses}
    with torch.no_grad():
        for split, xs, ys in (("train", x_train[:512], y_train[:512]),
                              ("val", x_val, y_val)):
            pred = model(xs)
            # scale_px converts training-frame pixels back to original pixels;
            # evaluation datasets share one letterbox scale per kind, recovered
            # at inference from the stored boxes. Here the normalized frame is
            # the metric frame, scale handled by the caller via sample boxes.
            pts, angs = cue_errors(pred, ys, scale_px=1.0)
            metrics[f"{split}_point_px_trainframe"] = float(np.mean(pts))
            metrics[f"{split}_angle_deg"] = float(np.mean(angs))
    return model, metrics


def save_model(out_dir: str, kind: str, model, metrics: dict,
               cfg: TrainConfig) -> None:
    os.makedirs(out_dir, exist_ok=True)
    torch.save(model.state_dict(), os.path.join(out_dir, f"{kind}_net.pt"))
    meta_path = os.path.join(out_dir, "meta.json")
    meta = {}
    if os.path.exists(meta_path):
        with open(meta_path) as fh:
            meta = json.load(fh)
    meta[kind] = {"train_size": TRAIN_SIZE, "width": cfg.width,
                  "config": asdict(cfg), "metrics": metrics}
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def load_model(model_dir: str, kind: str):
    meta_path = os.path.join(model_dir, "meta.json")
    with open(meta_path) as fh:
        meta = json.load(fh)
    if kind not in meta:
        raise ValueError(f"{meta_path}: no trained '{kind}' network")
    model = make_net(kind, width=meta[kind]["width"])
    state = torch.load(os.path.join(model_dir, f"{kind}_net.pt"),
                       weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model, meta[kind]
