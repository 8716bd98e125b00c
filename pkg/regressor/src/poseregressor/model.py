"""Reduced VGG-style regression network for projection pose cues."""

from __future__ import annotations

import torch
import torch.nn as nn

from .data import TRAIN_SIZE


class PoseNet(nn.Module):
    """Strided stem plus three VGG-style double-conv blocks and an FC head.

    Output layout per cue: (x, y, sin 2theta, cos 2theta) with coordinates
    normalized by the input size; the depth net emits one cue (4 values),
    the MIP net two (8 values, upper jaw first). Sized for single-core CPU
    training on 96x96 inputs.
    """

    def __init__(self, n_cues: int = 1, width: int = 12):
        super().__init__()
        chans = [width * 2, width * 4, width * 8]
        layers = [nn.Conv2d(1, width, 5, stride=2, padding=2),
                  nn.ReLU(inplace=True)]
        prev = width
        for ch in chans:
            layers += [
                nn.Conv2d(prev, ch, 3, padding=1), nn.ReLU(inplace=True),
                nn.Conv2d(ch, ch, 3, padding=1), nn.ReLU(inplace=True),
                nn.MaxPool2d(2),
            ]
            prev = ch
        self.features = nn.Sequential(*layers)
        feat_side = TRAIN_SIZE // 2 ** (len(chans) + 1)
        self.head = nn.Sequential(
            nn.Flatten(),
            nn.Linear(chans[-1] * feat_side * feat_side, 192),
            nn.ReLU(inplace=True),
            nn.Linear(192, 4 * n_cues),
        )
        self.n_cues = n_cues
        self.apply(_init_xavier)

    def forward(self, x):
        return self.head(self.features(x))


def _init_xavier(module):
    if isinstance(module, (nn.Conv2d, nn.Linear)):
        nn.init.xavier_uniform_(module.weight)
        if module.bias is not None:
            nn.init.zeros_(module.bias)


def make_net(kind: str, width: int = 12) -> PoseNet:
    if kind == "depth":
        return PoseNet(n_cues=1, width=width)
    if kind == "mip":
        return PoseNet(n_cues=2, width=width)
    raise ValueError(f"unknown net kind {kind!r}")
