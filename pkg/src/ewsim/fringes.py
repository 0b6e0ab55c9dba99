"""Least-squares fringe fits ``a + b cos(m * phase + c)``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class FringeFit:
    offset: float
    amplitude: float
    phase: float
    visibility: float
    visibility_stderr: float
    harmonic: int = 1

    def __call__(self, phase):
        return self.offset + self.amplitude * np.cos(self.harmonic * np.asarray(phase) + self.phase)


def fit_fringe(phases, values, stderr=None, harmonic: int = 1) -> FringeFit:
    """Fit ``a + b cos(m phase + c)`` linearly and return ``V = |b| / a`` with its error.

    Point errors ``stderr`` weight the fit; without them the residual scatter
    sets the scale (zero for exact data).
    """
    x = np.asarray(phases, dtype=float)
    y = np.asarray(values, dtype=float)
    design = np.column_stack([np.ones_like(x), np.cos(harmonic * x), np.sin(harmonic * x)])
    if stderr is not None:
        s = np.asarray(stderr, dtype=float)
        s = np.where(s > 0, s, max(float(s.max()), 1e-300))
        w = 1 / s
    else:
        w = np.ones_like(y)
    coef, *_ = np.linalg.lstsq(design * w[:, None], y * w, rcond=None)
    a, p, q = coef
    b = math.hypot(p, q)
    # a + p cos + q sin = a + b cos(m x + c) with c = atan2(-q, p)
    c = math.atan2(-q, p)
    vis = b / a if a != 0 else math.inf

    normal = (design * w[:, None]).T @ (design * w[:, None])
    if stderr is None:
        dof = max(len(y) - 3, 1)
        resid = y - design @ coef
        normal_scale = float(resid @ resid) / dof
    else:
        normal_scale = 1.0
    try:
        cov = np.linalg.inv(normal) * normal_scale
    except np.linalg.LinAlgError:
        cov = np.full((3, 3), np.nan)
    if a == 0:
        var = math.inf
    elif b > 0:
        grad = np.array([-b / a ** 2, p / (a * b), q / (a * b)])
        var = float(grad @ cov @ grad)
    else:
        # |b| is not differentiable at 0; use the mean radial variance
        var = float((cov[1, 1] + cov[2, 2]) / 2) / a ** 2
    return FringeFit(float(a), float(b), c, float(vis), math.sqrt(max(var, 0.0)), harmonic)
