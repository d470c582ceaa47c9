"""Independent reference computations used by the tests.

Nothing here imports the algorithms under test; the oracles work on plain
floats, numpy arrays or sympy expressions.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import sympy as sp


def grid_sign_changes(coeffs, lo: float, hi: float, step: float = 1e-3) -> list[float]:
    """Approximate real roots of a polynomial (ascending float coeffs) by sign changes on a grid."""
    xs = np.arange(lo, hi + step, step)
    vals = np.polynomial.polynomial.polyval(xs, coeffs)
    out = []
    for i in range(len(xs) - 1):
        if vals[i] == 0:
            out.append(float(xs[i]))
        elif vals[i] * vals[i + 1] < 0:
            out.append(float(xs[i] - vals[i] * step / (vals[i + 1] - vals[i])))
    return out


def grid_extrema_2d(H, box, res: float = 1e-2) -> dict[str, list[tuple[float, float]]]:
    """Classify grid points of ``H(v, w)`` by comparing with their 8 neighbours.

    Strict local extrema are centers of the Hamiltonian flow; saddles are
    detected from the sign of the finite-difference Hessian determinant at
    points where the discrete gradient changes sign in both directions.
    """
    (v0, v1), (w0, w1) = box
    v = np.arange(v0, v1 + res, res)
    w = np.arange(w0, w1 + res, res)
    V, W = np.meshgrid(v, w, indexing="ij")
    G = H(V, W)
    core = G[1:-1, 1:-1]
    neigh = [G[1 + di : G.shape[0] - 1 + di, 1 + dj : G.shape[1] - 1 + dj] for di in (-1, 0, 1) for dj in (-1, 0, 1) if di or dj]
    is_min = np.all([core < n for n in neigh], axis=0)
    is_max = np.all([core > n for n in neigh], axis=0)
    gv = (G[2:, 1:-1] - G[:-2, 1:-1]) / (2 * res)
    gw = (G[1:-1, 2:] - G[1:-1, :-2]) / (2 * res)
    hvv = (G[2:, 1:-1] - 2 * core + G[:-2, 1:-1]) / res**2
    hww = (G[1:-1, 2:] - 2 * core + G[1:-1, :-2]) / res**2
    det = hvv * hww
    # a saddle is where the gradient vanishes up to one grid cell with an indefinite Hessian
    small = (np.abs(gv) <= np.abs(hvv) * res) & (np.abs(gw) <= np.abs(hww) * res)
    is_saddle = small & (det < 0)
    pts = lambda mask: [(float(V[i + 1, j + 1]), float(W[i + 1, j + 1])) for i, j in zip(*np.nonzero(mask))]
    return {"center": pts(is_min) + pts(is_max), "saddle": _merge(pts(is_saddle), 3 * res)}


def _merge(points, radius):
    out = []
    for p in points:
        if all(abs(p[0] - q[0]) > radius or abs(p[1] - q[1]) > radius for q in out):
            out.append(p)
    return out


def sympy_lie_derivative(field_exprs, H_expr, syms):
    return sp.expand(sum(f * sp.diff(H_expr, s) for f, s in zip(field_exprs, syms)))


def sympy_poly(coeffs, s):
    return sum(sp.Rational(c.numerator, c.denominator) * s**k for k, c in enumerate(map(Fraction, coeffs)))


def fd_jacobian(f, p, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of ``f: R^3 -> R^3``."""
    p = np.asarray(p, dtype=float)
    J = np.zeros((3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = h * max(1.0, abs(p[j]))
        J[:, j] = (np.asarray(f(*(p + e))) - np.asarray(f(*(p - e)))) / (2 * e[j])
    return J


def rk4_fixed(f, y0, t_end: float, n: int = 20000) -> np.ndarray:
    """Classical RK4 with a fixed step; a crude but independent integrator."""
    y = np.asarray(y0, dtype=float)
    h = t_end / n
    for _ in range(n):
        k1 = f(y)
        k2 = f(y + h / 2 * k1)
        k3 = f(y + h / 2 * k2)
        k4 = f(y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y
