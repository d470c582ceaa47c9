"""Discrete dynamics of the nilpotent maps: fixed point, 2- and 3-cycles, m-cycles.

Cycles are computed in the simplest conjugated frame and transported back to
the original coordinates.  For ``deg P2 = 1`` that frame is the normal form
``(X, Y, Z) -> (P1(Y) - P1(Z), Z, a12 (P1(Y) - P1(Z))^2 + nu)``; otherwise
it is the ``Psi`` frame, where the map is constant after three steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from itertools import product as iproduct
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import ConsistencyError, ValidationError
from .field import (
    FieldParams,
    PolyMap3,
    build_field,
    conjugate,
    conjugated_map_closed_form,
    normal_map_closed_form,
    psi2_automorphism,
    psi_automorphism,
)
from .numeric import lambdify, lambdify_jacobian
from .poly import UniPoly, TriPoly, exact_rational_root, isolate_real_roots, refine_root

NEWTON_STARTS = 100
NEWTON_BOX = 10.0
NEWTON_TOL = 1e-12
CLUSTER_RADIUS = 1e-6
CLOSURE_TOL = 1e-10
S0_TOL = Fraction(1, 10**12)


@dataclass(frozen=True)
class OrbitPoint:
    coords: tuple
    index: int = 0

    @property
    def exact(self) -> bool:
        return all(isinstance(c, (int, Fraction)) for c in self.coords)

    def as_float(self) -> tuple[float, float, float]:
        return tuple(float(c) for c in self.coords)


@dataclass
class Orbit:
    """Orbit segment; ``diverged`` marks a float overflow that cut it short."""

    points: list[OrbitPoint]
    diverged: bool = False

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]


@dataclass(frozen=True)
class Frame:
    """Coordinates in which the dynamics is simplest.

    ``map`` is the discrete map in this frame and ``chart`` sends frame
    coordinates to original ones (with exact inverse).
    """

    name: str
    map: PolyMap3
    chart: PolyMap3


def dynamics_frame(params: FieldParams) -> Frame:
    psi = psi_automorphism(params)
    if params.d2 == 1:
        psi2 = psi2_automorphism(params).map
        return Frame("normal", normal_map_closed_form(params), psi.after(psi2))
    return Frame("psi", conjugated_map_closed_form(params), psi)


def _apply(m: PolyMap3, p: Sequence, fast=None):
    if all(isinstance(c, (int, Fraction)) for c in p):
        return tuple(m(p))
    if fast is not None:
        return fast(*p)
    return tuple(c(*map(float, p)) for c in m.components)


def iterate(F: PolyMap3, start, n: int) -> Orbit:
    """Orbit ``start, F(start), ..., F^n(start)``.

    Rational starts are iterated exactly; float starts stop early (with
    ``diverged=True``) on overflow or non-finite values.
    """
    if n < 0:
        raise ValidationError("n must be non-negative")
    coords = start.coords if isinstance(start, OrbitPoint) else tuple(start)
    if not all(isinstance(c, (int, Fraction)) for c in coords):
        coords = tuple(float(c) for c in coords)
        fast = lambdify(F.components)
    else:
        coords = tuple(Fraction(c) for c in coords)
        fast = None
    pts = [OrbitPoint(coords, 0)]
    for k in range(1, n + 1):
        try:
            coords = _apply(F, coords, fast)
        except OverflowError:
            return Orbit(pts, True)
        if fast is not None and not all(math.isfinite(c) for c in coords):
            return Orbit(pts, True)
        pts.append(OrbitPoint(coords, k))
    return Orbit(pts, False)


@dataclass(frozen=True)
class FixedPoint:
    original: tuple
    conjugated: tuple
    normal: tuple | None


def fixed_point(params: FieldParams) -> FixedPoint:
    """The unique fixed point, exactly, in every coordinate system."""
    psi = psi_automorphism(params)
    if params.d2 == 1:
        nu = params.nu
        normal = (Fraction(0), nu, nu)
        uvw = psi2_automorphism(params).map(normal)
    else:
        k = params.kappa
        w0 = params.A3 + params.a20 * k
        v0 = params.P2(w0) + params.a10
        u0 = params.P1(v0)
        uvw = (u0, v0, w0)
        normal = None
    return FixedPoint(tuple(psi(uvw)), tuple(uvw), normal)


@dataclass
class TwoCycleCertificate:
    """Symbolic identities ruling out 2-cycles, plus the numeric Newton cross-check."""

    case: str
    identities: dict[str, bool]
    statement: str
    fixed_point: tuple
    newton_converged: int
    newton_clusters: list[tuple[float, float, float]]

    @property
    def holds(self) -> bool:
        return all(self.identities.values()) and len(self.newton_clusters) <= 1


def _symbolic_two_cycle(params: FieldParams, frame: Frame, fp: tuple) -> tuple[str, dict, str]:
    N = frame.map
    N2 = N.after(N)
    if frame.name == "psi":
        u2, v2, w2 = N2.components
        v0, w0 = fp[1], fp[2]
        ids = {
            "w2 constant = w0": w2.is_constant() and w2.constant_term() == w0,
            "v2 constant = v0": v2.is_constant() and v2.constant_term() == v0,
            "u2 depends on w only": u2.variables() <= {2},
            "u2(w0) = u0": u2(Fraction(0), Fraction(0), w0) == fp[0],
        }
        statement = (
            "second iterate fixes v and w to constants v0, w0; u is then P1(v0); "
            "a 2-periodic point equals the fixed point"
        )
        return "d2>1 / a12=0 (Psi frame)", ids, statement
    X, Y, Z = TriPoly.var(0), TriPoly.var(1), TriPoly.var(2)
    NX, NY, NZ = N.components
    nu = params.nu
    ids = {
        "Y(N(p)) = Z(p)": NY == Z,
        "Z(N(p)) = a12*X(N(p))^2 + nu": NZ == NX * NX * params.a12 + nu,
        "X(N) antisymmetric under Y<->Z": NX.substitute((X, Z, Y)) == -NX,
        "X(N) vanishes on Y = Z": NX.substitute((X, Y, Y)).is_zero(),
        "fixed point (0, nu, nu)": tuple(N((0, nu, nu))) == (0, nu, nu),
    }
    statement = (
        "on a 2-cycle p -> p1 -> p: Y = Z1 = a12 X1^2 + nu, Z = a12 X^2 + nu and X = -X1, "
        "so Y = Z, hence X1 = 0 and p = (0, nu, nu)"
    )
    return "d2=1 (normal frame)", ids, statement


def _iterate_with_jacobian(f, jf, p: np.ndarray, m: int):
    J = np.eye(3)
    q = p
    for _ in range(m):
        Jq = np.array(jf(*q)).reshape(3, 3)
        q = np.array(f(*q))
        J = Jq @ J
    return q, J


def newton_periodic(f, jf, p0, m: int, tol: float = NEWTON_TOL, polish: int = 8):
    """Solve ``F^m(p) = p`` from ``p0``; returns the converged point or None.

    Globalized by MINPACK's hybrid trust-region Newton (plain step halving
    stalls far from the roots of these high-degree iterates), then polished
    with full Newton steps to a residual of ``tol`` relative to ``|p|``.
    """

    def residual(p):
        q, J = _iterate_with_jacobian(f, jf, p, m)
        return q - p, J - np.eye(3)

    try:
        with np.errstate(all="raise"):
            sol = optimize.root(residual, np.asarray(p0, dtype=float), jac=True, method="hybr",
                                options={"xtol": 1e-13})
            p = sol.x
            for _ in range(polish):
                r, A = residual(p)
                if np.linalg.norm(r) <= tol * max(1.0, np.linalg.norm(p)):
                    return p
                p = p + np.linalg.solve(A, -r)
    except (FloatingPointError, OverflowError, ValueError, np.linalg.LinAlgError):
        return None
    return None


def _starts(n: int, seed: int, box: float) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-box, box, size=(n, 3))


def _cluster(points: list[np.ndarray], radius: float) -> list[np.ndarray]:
    pts = sorted(points, key=lambda p: tuple(np.round(p, 6)))
    reps: list[np.ndarray] = []
    for p in pts:
        if not any(np.linalg.norm(p - q) <= radius * max(1.0, np.linalg.norm(q)) for q in reps):
            reps.append(p)
    return reps


def certify_no_2cycles(
    params: FieldParams, n_starts: int = NEWTON_STARTS, seed: int = 0, box: float = NEWTON_BOX
) -> TwoCycleCertificate:
    """Exact argument plus a multi-start Newton search on ``G^2(p) - p``.

    Raises ConsistencyError if an identity fails or Newton finds a 2-periodic
    point away from the fixed point.
    """
    frame = dynamics_frame(params)
    fp = fixed_point(params)
    fp_frame = fp.normal if frame.name == "normal" else fp.conjugated
    case, ids, statement = _symbolic_two_cycle(params, frame, fp_frame)
    if not all(ids.values()):
        bad = [k for k, v in ids.items() if not v]
        raise ConsistencyError(f"2-cycle certificate identities failed: {bad}")
    f = lambdify(frame.map.components)
    jf = lambdify_jacobian(frame.map.components)
    sols = [s for s in (newton_periodic(f, jf, p0, 2) for p0 in _starts(n_starts, seed, box)) if s is not None]
    clusters = _cluster(sols, CLUSTER_RADIUS)
    fpf = np.array([float(c) for c in fp_frame])
    for c in clusters:
        if np.linalg.norm(c - fpf) > CLUSTER_RADIUS * max(1.0, np.linalg.norm(fpf)):
            raise ConsistencyError(
                f"Newton search found a 2-periodic point {tuple(c)} away from the fixed point"
            )
    return TwoCycleCertificate(
        case, ids, statement, tuple(fp_frame), len(sols), [tuple(map(float, c)) for c in clusters]
    )


@dataclass
class CycleReport:
    """A periodic orbit of the map in frame and original coordinates.

    For 3-cycles ``multiplier`` is ``L22``, the only nonzero eigenvalue of the
    linearized third iterate.  For numeric m-cycles it is the largest-modulus
    eigenvalue of the product of Jacobians along the cycle.
    """

    length: int
    points: list[OrbitPoint]
    original_points: list[OrbitPoint]
    multiplier: object
    classification: str
    s0: Fraction | None = None
    exact: bool = False
    closed_form_multiplier: object = None
    product_matrix: list = dc_field(default=None, repr=False)
    frame: str = "normal"

    @property
    def multiplier_L22(self):
        return self.multiplier


def classify_multiplier(value) -> str:
    a = abs(value)
    if a < 1:
        return "attractor"
    if a > 1:
        return "saddle"
    return "marginal"


def h_polynomial(params: FieldParams) -> UniPoly:
    """``h(s) = a12 (P1(s) - P1(nu))^2 + nu - s``."""
    nu = params.nu
    D = params.P1 - params.P1(nu)
    return D * D * params.a12 + UniPoly([nu, -1])


def _require_3cycle_case(params: FieldParams):
    if params.d2 != 1 or params.a12 == 0:
        raise ValidationError("3-cycle machinery requires d2=1, deg A1=2")


def _cycle_points(params: FieldParams, s0):
    nu = params.nu
    if not isinstance(s0, Fraction):
        nu = float(nu)
    D = params.P1(s0) - params.P1(nu)
    zero = s0 * 0
    return [(zero, s0, nu + zero), (D, nu + zero, s0), (-D, s0, s0)]


def closed_form_L22(params: FieldParams, s0):
    D = params.P1(s0) - params.P1(params.nu)
    dP = params.P1.derivative()(s0)
    return 4 * params.a12**2 * D * D * dP * dP


def find_3cycle(params: FieldParams, tol=S0_TOL) -> list[CycleReport]:
    """All 3-cycles through ``(0, s0, nu)`` with ``h(s0) = 0``, ``s0 != nu``.

    Rational roots give exact cycles; irrational ones are refined to width
    ``tol`` and the cycle is reported in floats.
    """
    _require_3cycle_case(params)
    nu = params.nu
    h = h_polynomial(params)
    chart = dynamics_frame(params).chart
    out = []
    for iv in isolate_real_roots(h):
        if iv.contains(nu):
            continue
        s_exact = exact_rational_root(iv, h)
        if s_exact is not None:
            s0 = s_exact
            pts = _cycle_points(params, s0)
            L22 = closed_form_L22(params, s0)
            exact = True
        else:
            s0 = refine_root(iv, h, tol)
            pts = [tuple(float(c) for c in p) for p in _cycle_points(params, s0)]
            L22 = float(closed_form_L22(params, s0))
            exact = False
        orig = [OrbitPoint(tuple(_apply(chart, p)), k) for k, p in enumerate(pts)]
        report = CycleReport(
            3,
            [OrbitPoint(p, k) for k, p in enumerate(pts)],
            orig,
            L22,
            classify_multiplier(L22),
            s0=s0,
            exact=exact,
            closed_form_multiplier=L22,
        )
        out.append(classify_cycle(params, report))
    return out


def _jacobian_at(J, p):
    return [[e(*p) for e in row] for row in J]


def _matmul_num(a, b):
    return [[sum(a[i][k] * b[k][j] for k in range(3)) for j in range(3)] for i in range(3)]


def classify_cycle(params: FieldParams, cycle: CycleReport, rtol: float = 1e-10) -> CycleReport:
    """Recompute ``L22`` from the product of Jacobians along the 3-cycle.

    The product must have zero first column and zero (3,3) entry, and its
    (2,2) entry must match the closed form.  Raises ConsistencyError otherwise.
    """
    _require_3cycle_case(params)
    if cycle.length != 3:
        raise ValidationError("classify_cycle expects a 3-cycle")
    J = dynamics_frame(params).map.jacobian()
    if isinstance(cycle.s0, Fraction):
        # rebuild the points from the (refined) rational s0: expanded Jacobian
        # entries cancel badly in floats near s0 = nu
        pts = _cycle_points(params, cycle.s0)
        if cycle.exact and h_polynomial(params)(cycle.s0) != 0:
            raise ConsistencyError(f"s0 = {cycle.s0} is not a root of h")
        reported = [tuple(float(c) for c in p.coords) for p in cycle.points]
        rebuilt = [tuple(float(c) for c in p) for p in pts]
        if not np.allclose(reported, rebuilt, rtol=1e-12, atol=1e-12):
            raise ConsistencyError("cycle points do not match the points built from s0")
    else:
        pts = [tuple(float(c) for c in p.coords) for p in cycle.points]
    M = _jacobian_at(J, pts[0])
    for p in pts[1:]:
        M = _matmul_num(_jacobian_at(J, p), M)
    closed = closed_form_L22(params, cycle.s0)
    if not cycle.exact:
        M = [[float(e) for e in row] for row in M]
    L22 = M[1][1]
    if not cycle.exact:
        closed = float(closed)
        scale = max(1.0, abs(closed))
        zero_ok = all(abs(M[i][0]) <= rtol * scale for i in range(3)) and abs(M[2][2]) <= rtol * scale
        agree = abs(L22 - closed) <= rtol * scale
    else:
        zero_ok = all(M[i][0] == 0 for i in range(3)) and M[2][2] == 0
        agree = L22 == closed
    if not zero_ok:
        raise ConsistencyError("linearized third iterate lacks the zero first column / (3,3) entry")
    if not agree:
        raise ConsistencyError(f"L22 mismatch: product {L22} vs closed form {closed}")
    cycle.multiplier = L22
    cycle.closed_form_multiplier = closed
    cycle.product_matrix = M
    cycle.classification = classify_multiplier(L22)
    return cycle


def _divisors(m: int) -> list[int]:
    return [k for k in range(1, m) if m % k == 0]


def find_cycles_numeric(
    params: FieldParams,
    m: int,
    n_starts: int = NEWTON_STARTS,
    seed: int = 0,
    box: float = NEWTON_BOX,
) -> list[CycleReport]:
    """Cycles of minimal period ``m`` found by multi-start Newton on ``G^m - id``.

    An empty result means nothing was found, not that no cycle exists.
    """
    if params.d2 != 1:
        raise ValidationError("numeric cycle search requires d2=1")
    if not 2 <= m <= 8:
        raise ValidationError("cycle length must lie in [2, 8]")
    frame = dynamics_frame(params)
    f = lambdify(frame.map.components)
    jf = lambdify_jacobian(frame.map.components)
    fpf = np.array([float(c) for c in fixed_point(params).normal])
    sols = [s for s in (newton_periodic(f, jf, p0, m) for p0 in _starts(n_starts, seed, box)) if s is not None]
    found: list[list[np.ndarray]] = []
    for p in _cluster(sols, CLUSTER_RADIUS):
        scale = max(1.0, np.linalg.norm(p))
        if np.linalg.norm(p - fpf) <= CLUSTER_RADIUS * scale:
            continue
        orbit = [p]
        for _ in range(m):
            orbit.append(np.array(f(*orbit[-1])))
        if np.linalg.norm(orbit[m] - p) > CLOSURE_TOL * scale:
            continue
        if any(np.linalg.norm(orbit[k] - p) <= CLUSTER_RADIUS * scale for k in _divisors(m)):
            continue
        pts = orbit[:m]
        if any(
            any(np.linalg.norm(q - r) <= CLUSTER_RADIUS * max(1.0, np.linalg.norm(r)) for r in c) for q in pts for c in found
        ):
            continue
        found.append(pts)
    reports = []
    for pts in found:
        start = min(range(m), key=lambda i: tuple(np.round(pts[i], 9)))
        pts = pts[start:] + pts[:start]
        _, J = _iterate_with_jacobian(f, jf, pts[0], m)
        mult = max(np.linalg.eigvals(J), key=abs)
        mult = float(mult.real) if abs(mult.imag) < 1e-12 else complex(mult)
        orig = [OrbitPoint(tuple(_apply(frame.chart, tuple(map(float, q)))), k) for k, q in enumerate(pts)]
        reports.append(
            CycleReport(
                m,
                [OrbitPoint(tuple(map(float, q)), k) for k, q in enumerate(pts)],
                orig,
                mult,
                classify_multiplier(mult),
                product_matrix=J.tolist(),
            )
        )
    reports.sort(key=lambda r: r.points[0].coords)
    return reports


def search_attracting_3cycle(
    grid: Sequence[Fraction] = tuple(Fraction(n, 2) for n in range(-6, 7)),
) -> tuple[FieldParams, CycleReport] | None:
    """Scan quadratic ``P1 = s^2 + b s`` with ``a12``, ``nu`` on ``grid`` for an attracting 3-cycle.

    ``nu`` is set through ``A3`` (all other constants zero, ``P2 = s``).
    Returns the first hit in scan order.
    """
    for a12, b, nu in iproduct(grid, grid, grid):
        if a12 == 0:
            continue
        params = FieldParams(UniPoly([0, b, 1]), UniPoly([0, 1]), a12=a12, A3=nu)
        for cyc in find_3cycle(params):
            if cyc.classification == "attractor":
                return params, cyc
    return None
