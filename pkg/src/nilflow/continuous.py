"""Polynomial first integrals and numerical flows of the nilpotent fields.

Integrals are derived in the ``Psi`` frame, where the field reads
``u' = P1(v), v' = P2(w), w' = a12/(d2 p_d2) P1(v)^2 + A3``, and transported
to the original coordinates by exact composition with ``Psi^-1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ConsistencyError, ValidationError
from .field import (
    FieldParams,
    PolyMap3,
    build_field,
    conjugated_field_closed_form,
    psi_automorphism,
    pushforward_field,
)
from .numeric import lambdify
from .ode import dopri5_steps
from .poly import TriPoly, UniPoly, X, Y, Z, cross

ESCAPE_RADIUS = 1e6
DEFAULT_WINDOW = 50.0


def lie_derivative(F: PolyMap3, H: TriPoly) -> TriPoly:
    """``<F, grad H> = F1 H_x + F2 H_y + F3 H_z``."""
    return F[0] * H.diff(0) + F[1] * H.diff(1) + F[2] * H.diff(2)


def verify_first_integral(F: PolyMap3, H: TriPoly) -> bool:
    """True iff ``H`` is a first integral of the field ``F`` (exact test).

    Constant ``H`` is rejected with ValidationError: first integrals are
    non-constant by definition.
    """
    if H.is_constant():
        raise ValidationError("a first integral must be non-constant")
    return lie_derivative(F, H).is_zero()


@dataclass
class FirstIntegralSet:
    H: TriPoly
    H1: TriPoly | None = None
    H2: TriPoly | None = None
    independence_witness: tuple | None = None
    frame: str = "psi_conjugated"
    field: PolyMap3 | None = dc_field(default=None, repr=False)
    verified: dict = dc_field(default_factory=dict)

    def integrals(self) -> dict[str, TriPoly]:
        out = {"H": self.H}
        if self.H1 is not None:
            out["H1"] = self.H1
        if self.H2 is not None:
            out["H2"] = self.H2
        return out

    @property
    def completely_integrable(self) -> bool:
        return self.H1 is not None and self.H2 is not None and self.independence_witness is not None


def conjugated_field(params: FieldParams) -> PolyMap3:
    """Field in the ``Psi`` frame, computed by pushforward and checked against the closed form."""
    G = pushforward_field(build_field(params), psi_automorphism(params))
    if G != conjugated_field_closed_form(params):
        raise ConsistencyError("pushforward of the field disagrees with its closed form")
    return G


def _to_original(fis: FirstIntegralSet, params: FieldParams) -> FirstIntegralSet:
    inv = psi_automorphism(params).inverse.components
    move = lambda H: None if H is None else H.substitute(inv)  # noqa: E731
    F = build_field(params)
    out = FirstIntegralSet(
        move(fis.H), move(fis.H1), move(fis.H2), None, "original", F, {}
    )
    if out.H1 is not None and out.H2 is not None:
        out.independence_witness = cross(out.H1.gradient(), out.H2.gradient())
    for name, H in out.integrals().items():
        if not verify_first_integral(F, H):
            raise ConsistencyError(f"{name} is not conserved in original coordinates")
        out.verified[name] = True
    return out


def hamiltonian_conjugated(params: FieldParams) -> TriPoly:
    """``H(u,v,w) = int P2(w) dw - a12/(d2 p_d2) int P1(v)^2 dv - A3 v``."""
    k = params.kappa
    intP2 = params.P2.antiderivative().to_tripoly(2)
    intP1sq = (params.P1 * params.P1).antiderivative().to_tripoly(1)
    return intP2 - intP1sq * (params.a12 * k) - Y * params.A3


def derive_H(params: FieldParams, frame: str = "psi_conjugated") -> FirstIntegralSet:
    """The first integral valid for every parameter choice, verified exactly."""
    G = conjugated_field(params)
    H = hamiltonian_conjugated(params)
    if not verify_first_integral(G, H):
        raise ConsistencyError("H is not a first integral of the conjugated field")
    fis = FirstIntegralSet(H, frame="psi_conjugated", field=G, verified={"H": True})
    if frame == "original":
        return _to_original(fis, params)
    if frame != "psi_conjugated":
        raise ValidationError(f"unknown frame {frame!r}")
    return fis


def xi_sequence(P2: UniPoly, n: int) -> list[UniPoly]:
    """``xi_0 = w``, ``xi_j = int P2(w) xi_{j-1}(w) dw``."""
    xs = [UniPoly([0, 1])]
    for _ in range(n):
        xs.append((P2 * xs[-1]).antiderivative())
    return xs


def derive_complete(params: FieldParams, frame: str = "psi_conjugated") -> FirstIntegralSet:
    """Two independent polynomial first integrals for ``a12 = 0``."""
    if params.a12 != 0:
        raise ValidationError("complete integrability established only for deg A1 = 1")
    G = conjugated_field(params)
    A3 = params.A3
    P1, P2 = params.P1, params.P2
    if A3 == 0:
        H1 = Z
        H2 = P1.antiderivative().to_tripoly(1) - X * P2.to_tripoly(2)
    else:
        H1 = P2.antiderivative().to_tripoly(2) - Y * A3
        d1 = params.d1
        xis = xi_sequence(P2, d1)
        H2 = X * A3 ** (d1 + 1)
        for j in range(d1 + 1):
            term = P1.derivative(j).to_tripoly(1) * xis[j].to_tripoly(2) * (A3 ** (d1 - j))
            H2 = H2 - term if j % 2 == 0 else H2 + term
    H = hamiltonian_conjugated(params)
    fis = FirstIntegralSet(H, H1, H2, cross(H1.gradient(), H2.gradient()), "psi_conjugated", G)
    for name, P in fis.integrals().items():
        if not verify_first_integral(G, P):
            raise ConsistencyError(f"{name} is not a first integral")
        fis.verified[name] = True
    if all(c.is_zero() for c in fis.independence_witness):
        raise ConsistencyError("H1 and H2 are functionally dependent")
    if frame == "original":
        return _to_original(fis, params)
    if frame != "psi_conjugated":
        raise ValidationError(f"unknown frame {frame!r}")
    return fis


@dataclass
class Trajectory:
    """Time-ordered samples of a numerical trajectory through ``t = 0``."""

    t: np.ndarray
    states: np.ndarray
    H_drift: float
    drifts: dict[str, float]
    outcome: str
    escape_times: dict[str, float | None]
    escape_radius: float

    @property
    def samples(self):
        return list(zip(self.t.tolist(), map(tuple, self.states.tolist())))

    def at(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.t, self.states[:, i]) for i in range(3)])


def _field_function(F) -> Callable:
    if isinstance(F, PolyMap3):
        fast = lambdify(F.components)
        return lambda t, y: fast(y[0], y[1], y[2])
    return F


def _integral_functions(integrals) -> dict[str, Callable]:
    out = {}
    for name, H in (integrals or {}).items():
        if isinstance(H, TriPoly):
            g = lambdify([H])
            out[name] = lambda p, g=g: g(p[0], p[1], p[2])[0]
        else:
            out[name] = H
    return out


def _run_direction(f, x0, t_end, tol, radius, max_step):
    ts, ys = [], []
    escaped_at = None
    for step in dopri5_steps(f, 0.0, x0, t_end, rtol=tol, atol=tol, max_step=max_step):
        ts.append(step.t1)
        ys.append(step.y1)
        if np.linalg.norm(step.y1) > radius:
            escaped_at = step.t1
            break
    return ts, ys, escaped_at


def integrate(
    F,
    x0: Sequence[float],
    t_span: tuple[float, float] = (-DEFAULT_WINDOW, DEFAULT_WINDOW),
    tol: float = 1e-10,
    integrals: Mapping | None = None,
    escape_radius: float = ESCAPE_RADIUS,
    max_step: float = math.inf,
) -> Trajectory:
    """Integrate ``x' = F(x)`` from ``t = 0`` forwards to ``t_span[1]`` and backwards to ``t_span[0]``.

    ``integrals`` maps names to TriPoly (or callables) whose relative drift
    ``max |H - H(x0)| / max(|H(x0)|, 1)`` is recorded.  A direction stops early
    once the state norm exceeds ``escape_radius``.  Outcomes never claim
    ``closed_orbit``; that is decided by the return-map analysis.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    a, b = t_span
    if a > 0 or b < 0:
        raise ValidationError("t_span must contain 0")
    f = _field_function(F)
    x0 = np.asarray(x0, dtype=float)
    tf, yf, esc_f = _run_direction(f, x0, b, tol, escape_radius, max_step) if b > 0 else ([], [], None)
    tb, yb, esc_b = _run_direction(f, x0, a, tol, escape_radius, max_step) if a < 0 else ([], [], None)
    t = np.array(tb[::-1] + [0.0] + tf)
    states = np.array(yb[::-1] + [x0] + yf)
    drifts = {}
    for name, g in _integral_functions(integrals).items():
        h0 = g(x0)
        vals = np.array([g(s) for s in states])
        drifts[name] = float(np.max(np.abs(vals - h0)) / max(abs(h0), 1.0))
    if esc_f is not None and esc_b is not None:
        outcome = "escaped_both"
    elif esc_f is not None:
        outcome = "escaped_forward"
    elif esc_b is not None:
        outcome = "escaped_backward"
    else:
        outcome = "bounded_window"
    return Trajectory(
        t,
        states,
        max(drifts.values(), default=0.0),
        drifts,
        outcome,
        {"forward": esc_f, "backward": esc_b},
        escape_radius,
    )


def _require_linear_case(params: FieldParams):
    if params.d1 != 1 or params.d2 != 1 or params.a12 != 0:
        raise ValidationError("closed-form flow requires d1 = d2 = 1 and a12 = 0")


def linear_case_coordinates(params: FieldParams):
    """Affine maps original -> ``(X, Y, Z)`` with ``X' = Y, Y' = Z, Z' = A3`` and back."""
    _require_linear_case(params)
    p1, p2 = params.p_d1, params.p_d2
    psi = psi_automorphism(params)
    to_norm = PolyMap3(
        (X * (1 / (p1 * p2)), params.P1(Y) * (1 / (p1 * p2)), params.P2(Z) * (1 / p2))
    )
    from_norm = PolyMap3(
        (X * (p1 * p2), (Y * (p1 * p2) - params.P1[0]) * (1 / p1), (Z * p2 - params.P2[0]) * (1 / p2))
    )
    forward = to_norm.after(psi.inverse)
    backward = psi.after(from_norm)
    return forward, backward


def explicit_flow_linear_case(params: FieldParams, x0: Sequence, t) -> tuple:
    """Closed-form flow for ``d1 = d2 = 1``, ``a12 = 0`` in original coordinates."""
    forward, backward = linear_case_coordinates(params)
    exact = all(isinstance(c, (int, Fraction)) for c in x0) and isinstance(t, (int, Fraction))
    if exact:
        X0, Y0, Z0 = forward(tuple(Fraction(c) for c in x0))
        A3 = params.A3
        t = Fraction(t)
    else:
        X0, Y0, Z0 = (float(c) for c in forward(tuple(Fraction(float(c)) for c in x0)))
        A3 = float(params.A3)
        t = float(t)
    Xt = A3 / 6 * t**3 + Z0 / 2 * t**2 + Y0 * t + X0
    Yt = A3 / 2 * t**2 + Z0 * t + Y0
    Zt = A3 * t + Z0
    if exact:
        return tuple(backward((Xt, Yt, Zt)))
    return tuple(float(c) for c in backward((Fraction(Xt), Fraction(Yt), Fraction(Zt))))


def level_set_points(params: FieldParams, level, v_range=(-5.0, 5.0), n: int = 101) -> list[tuple[float, float]]:
    """Points ``(v, w)`` on the planar level curve ``G(v, w) = level``.

    The planar Hamiltonian is separable, ``G = f(v) + g(w)``, so each ``v`` on
    the grid gives the real roots in ``w`` of ``g(w) = level - f(v)``.
    """
    from .poly import isolate_real_roots, refine_root

    f = -(params.P1 * params.P1).antiderivative() * (params.a12 * params.kappa) - UniPoly([0, params.A3])
    g = params.P2.antiderivative()
    level = Fraction(level) if not isinstance(level, float) else Fraction(level)
    lo, hi = (Fraction(v) for v in v_range)
    out = []
    for i in range(n):
        v = lo + (hi - lo) * i / (n - 1) if n > 1 else lo
        eq = g - (level - f(v))
        for iv in isolate_real_roots(eq) if not eq.is_zero() else []:
            w = refine_root(iv, eq, Fraction(1, 10**12))
            out.append((float(v), float(w)))
    return out
