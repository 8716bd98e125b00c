"""Downhill simplex minimization over 6-DoF pose parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .transforms import TransformParams


@dataclass
class SimplexOptions:
    initial_step_rot: float = math.radians(2.0)
    initial_step_trans: float = 1.0  # mm
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    tol_f: float = 1e-6   # relative spread of simplex function values
    tol_x: float = 1e-4   # max coordinate spread of simplex vertices
    max_evals: int = 2000

    def __post_init__(self):
        if min(self.reflection, self.expansion, self.contraction, self.shrink) <= 0:
            raise ValueError("simplex coefficients must be positive")
        if not (self.expansion > 1.0 > self.contraction):
            raise ValueError("need expansion > 1 > contraction")

    def initial_steps(self) -> np.ndarray:
        return np.array([self.initial_step_rot] * 3 + [self.initial_step_trans] * 3)


class _BudgetExhausted(Exception):
    pass


def nelder_mead(f, start: TransformParams, opts: SimplexOptions | None = None):
    """Minimize f(params_array) -> float from a start pose.

    The initial simplex is the start vertex plus one vertex per axis offset
    by the configured rotation/translation step. Iterates reflection,
    expansion, contraction, and shrink until the function spread, vertex
    spread, or evaluation budget is hit. Returns (best TransformParams,
    best value, evaluation count); the best value is never worse than the
    best initial vertex.
    """
    if opts is None:
        opts = SimplexOptions()
    x0 = start.as_array()
    n = x0.size
    steps = opts.initial_steps()

    evals = 0

    def ev(x):
        nonlocal evals
        if evals >= opts.max_evals:
            raise _BudgetExhausted
        evals += 1
        v = float(f(x))
        return v if not math.isnan(v) else math.inf

    verts = np.empty((n + 1, n))
    vals = np.empty(n + 1)
    verts[0] = x0
    for i in range(n):
        verts[i + 1] = x0
        verts[i + 1, i] += steps[i]
    try:
        for i in range(n + 1):
            vals[i] = ev(verts[i])
    except _BudgetExhausted:
        raise ValueError("evaluation budget too small for the initial simplex")
    if not np.all(np.isfinite(vals)):
        raise ValueError("objective is non-finite on the initial simplex")

    try:
        while True:
            order = np.argsort(vals, kind="stable")
            verts = verts[order]
            vals = vals[order]

            spread_f = vals[-1] - vals[0]
            if 2.0 * spread_f <= opts.tol_f * (abs(vals[0]) + abs(vals[-1]) + 1e-12):
                break
            if np.abs(verts[1:] - verts[0]).max() <= opts.tol_x:
                break

            centroid = verts[:-1].mean(axis=0)
            xr = centroid + opts.reflection * (centroid - verts[-1])
            fr = ev(xr)
            if fr < vals[0]:
                xe = centroid + opts.expansion * opts.reflection * (centroid - verts[-1])
                fe = ev(xe)
                if fe < fr:
                    verts[-1], vals[-1] = xe, fe
                else:
                    verts[-1], vals[-1] = xr, fr
            elif fr < vals[-2]:
                verts[-1], vals[-1] = xr, fr
            elif fr < vals[-1]:
                xc = centroid + opts.contraction * opts.reflection * (centroid - verts[-1])
                fc = ev(xc)
                if fc <= fr:
                    verts[-1], vals[-1] = xc, fc
                else:
                    _shrink(verts, vals, opts.shrink, ev)
            else:
                xc = centroid - opts.contraction * (centroid - verts[-1])
                fc = ev(xc)
                if fc < vals[-1]:
                    verts[-1], vals[-1] = xc, fc
                else:
                    _shrink(verts, vals, opts.shrink, ev)
    except _BudgetExhausted:
        pass

    best = int(np.argmin(vals))
    return TransformParams.from_array(verts[best]), float(vals[best]), evals


def _shrink(verts, vals, sigma, ev):
    for i in range(1, len(verts)):
        verts[i] = verts[0] + sigma * (verts[i] - verts[0])
        vals[i] = ev(verts[i])
