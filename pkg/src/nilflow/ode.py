"""Dormand-Prince 5(4) integrator with cubic Hermite dense output.

The integrator is exposed as a step generator so that callers (escape
detection, section crossings) decide when to stop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .errors import IntegrationError

# Butcher tableau (Dormand & Prince 1980)
C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
E = tuple(b5 - b4 for b5, b4 in zip(B5, B4))


@dataclass(frozen=True)
class Step:
    """One accepted step; ``dy0``/``dy1`` are the field values at its ends."""

    t0: float
    y0: np.ndarray
    dy0: np.ndarray
    t1: float
    y1: np.ndarray
    dy1: np.ndarray

    def __call__(self, t: float) -> np.ndarray:
        """Cubic Hermite interpolant on ``[t0, t1]``."""
        h = self.t1 - self.t0
        s = (t - self.t0) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return h00 * self.y0 + h10 * h * self.dy0 + h01 * self.y1 + h11 * h * self.dy1


def _initial_step(f, t0, y0, f0, direction, rtol, atol):
    scale = atol + np.abs(y0) * rtol
    d0 = np.linalg.norm(y0 / scale) / math.sqrt(len(y0))
    d1 = np.linalg.norm(f0 / scale) / math.sqrt(len(y0))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + direction * h0 * f0
    f1 = np.asarray(f(t0 + direction * h0, y1), dtype=float)
    d2 = np.linalg.norm((f1 - f0) / scale) / math.sqrt(len(y0)) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def dopri5_steps(
    f: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0,
    t_end: float,
    rtol: float = 1e-10,
    atol: float = 1e-10,
    max_step: float = math.inf,
) -> Iterator[Step]:
    """Yield accepted steps from ``t0`` towards ``t_end`` (either direction).

    Raises IntegrationError when the step size underflows.
    """
    y = np.asarray(y0, dtype=float)
    t = float(t0)
    direction = 1.0 if t_end >= t0 else -1.0
    if t == t_end:
        return
    fy = np.asarray(f(t, y), dtype=float)
    h = _initial_step(f, t, y, fy, direction, rtol, atol)
    h = min(h, max_step)
    while direction * (t_end - t) > 0:
        min_h = 16 * np.spacing(abs(t)) if t else 1e-300
        h = min(h, abs(t_end - t))
        if h < min_h:
            raise IntegrationError(f"step size underflow at t={t}", t=t, state=y.copy())
        hs = direction * h
        k = [fy]
        for i in range(1, 7):
            yi = y + hs * sum(a * kj for a, kj in zip(A[i], k) if a)
            k.append(np.asarray(f(t + C[i] * hs, yi), dtype=float))
        y_new = y + hs * sum(b * kj for b, kj in zip(B5, k) if b)
        err_vec = hs * sum(e * kj for e, kj in zip(E, k) if e)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        with np.errstate(over="ignore", invalid="ignore"):
            err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        if not math.isfinite(err) or not np.all(np.isfinite(y_new)):
            h *= 0.2
            continue
        if err <= 1.0:
            t_new = t + hs
            f_new = k[6]
            yield Step(t, y, fy, t_new, y_new, f_new)
            t, y, fy = t_new, y_new, f_new
            factor = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h = min(h * factor, max_step)
        else:
            h *= max(0.2, 0.9 * err ** -0.2)
