"""Normal forms for ``d1 = d2 = 1`` and the isochronous periodic surface.

With ``a12 != 0`` the field reduces to ``X' = Y, Y' = Z, Z' = Y^2 + mu``.
For ``mu = -beta^2 < 0`` the rescaling ``X = sqrt(beta) x``,
``Y = beta (y - 1)``, ``Z = beta^(3/2) z``, ``tau = sqrt(beta) t`` gives the
unit system ``x' = y - 1, y' = z, z' = y (y - 2)``, whose ``(y, z)`` part is
Hamiltonian with a center at the origin and a saddle at ``(2, 0)``.  The
section ``{y = 0, z > 0}`` is parametrized by ``(x, c)`` with ``z = sqrt(2c)``,
and zeros of the displacement ``L(0, c)`` give periodic orbits.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .continuous import ESCAPE_RADIUS, conjugated_field, explicit_flow_linear_case, linear_case_coordinates
from .errors import ConsistencyError, IntegrationError, ValidationError
from .field import FieldParams, PolyMap3, psi_automorphism, pushforward_field
from .ode import dopri5_steps
from .poly import (
    RootInterval,
    TriPoly,
    UniPoly,
    X,
    Y,
    Z,
    count_roots,
    isolate_real_roots,
    refine_root,
    square_free_part,
    sturm_sequence,
)

C_CENTER = Fraction(0)
C_HALF = Fraction(2, 3)  # G(1, 0): level through y = 1 on the z-axis
C_SADDLE = Fraction(4, 3)  # G(2, 0): homoclinic level
CSTAR_BRACKET = (2 / 3 + 1e-3, 4 / 3 - 1e-3)
SECTION_TOL = 1e-8
TIME_TOL = 1e-12
CLOSURE_TOL = 1e-6
PERIOD_TOL = 1e-8
WINDOW = 200.0

UNIT_SYSTEM = PolyMap3((Y - 1, Z, Y * (Y - 2)))
UNIT_HAMILTONIAN = (Y * Y * 6 + Z * Z * 3 - Y**3 * 2) * Fraction(1, 6)


def _unit_rhs(t, s):
    y = s[1]
    return np.array((y - 1.0, s[2], y * (y - 2.0)))


def unit_energy(y: float, z: float) -> float:
    return y * y + z * z / 2 - y**3 / 3


@dataclass(frozen=True)
class ReductionRecord:
    """Result of reducing a ``d1 = d2 = 1``, ``a12 != 0`` field to normal form."""

    mu: Fraction
    forward_change: PolyMap3
    original_to_normal: PolyMap3
    normal_to_original: PolyMap3
    classification: str
    beta: float | None = None
    time_scale: float | None = None

    @property
    def mu_float(self) -> float:
        return float(self.mu)

    def normal_to_unit(self, p: Sequence[float]) -> tuple[float, float, float]:
        b = self._beta()
        return (p[0] / math.sqrt(b), p[1] / b + 1.0, p[2] / b**1.5)

    def unit_to_normal(self, p: Sequence[float]) -> tuple[float, float, float]:
        b = self._beta()
        return (math.sqrt(b) * p[0], b * (p[1] - 1.0), b**1.5 * p[2])

    def _beta(self) -> float:
        if self.beta is None:
            raise ValidationError("unit rescaling exists only for mu < 0")
        return self.beta


def normal_system(mu) -> PolyMap3:
    return PolyMap3((Y, Z, Y * Y + mu))


def reduce(params: FieldParams) -> ReductionRecord:
    """Affine reduction to ``X' = Y, Y' = Z, Z' = Y^2 + mu``, verified exactly."""
    if params.d1 != 1 or params.d2 != 1:
        raise ValidationError("reduction supports only deg P1 = deg P2 = 1")
    if params.a12 == 0:
        raise ValidationError("a12 = 0: use the explicit linear flow (explicit_flow_linear_case)")
    a12, p1, p2 = params.a12, params.p_d1, params.p_d2
    mu = params.A3 * a12 * p2 * p1**2
    fwd = PolyMap3((X * (a12 * p1), params.P1(Y) * (a12 * p1), params.P2(Z) * (a12 * p1**2)))
    bwd = PolyMap3(
        (
            X * (1 / (a12 * p1)),
            (Y * (1 / (a12 * p1)) - params.P1[0]) * (1 / p1),
            (Z * (1 / (a12 * p1**2)) - params.P2[0]) * (1 / p2),
        )
    )
    if fwd.after(bwd).components != (X, Y, Z):
        raise ConsistencyError("reduction change is not invertible as constructed")
    reduced = pushforward_field(conjugated_field(params), bwd.with_inverse(fwd))
    if reduced != normal_system(mu):
        raise ConsistencyError("reduction does not produce the normal form")
    psi = psi_automorphism(params)
    to_normal = fwd.after(psi.inverse)
    to_original = psi.after(bwd)
    if mu > 0:
        cls, beta = "all_escape", None
    elif mu == 0:
        cls, beta = "cuspidal_surface", None
    else:
        cls, beta = "isochronous_surface", math.sqrt(-float(mu))
    return ReductionRecord(
        mu,
        fwd,
        to_normal,
        to_original,
        cls,
        beta,
        math.sqrt(beta) if beta is not None else None,
    )


@dataclass(frozen=True)
class SeparableHamiltonian:
    """Planar ``G(a, b) = f(a) + g(b)`` with ``a' = G_b``, ``b' = -G_a``."""

    f: UniPoly
    g: UniPoly
    names: tuple[str, str] = ("v", "w")

    def __call__(self, a, b):
        return self.f(a) + self.g(b)


def planar_hamiltonian(params: FieldParams) -> SeparableHamiltonian:
    """Hamiltonian of the ``(v, w)`` subsystem in the ``Psi`` frame."""
    f = -(params.P1 * params.P1).antiderivative() * (params.a12 * params.kappa) - UniPoly([0, params.A3])
    return SeparableHamiltonian(f, params.P2.antiderivative())


UNIT_PLANAR = SeparableHamiltonian(UniPoly([0, 0, 1, Fraction(-1, 3)]), UniPoly([0, 0, Fraction(1, 2)]), ("y", "z"))


def normal_planar(mu) -> SeparableHamiltonian:
    """``G(Y, Z) = -mu Y + Z^2/2 - Y^3/3``."""
    return SeparableHamiltonian(UniPoly([0, -Fraction(mu), 0, Fraction(-1, 3)]), UniPoly([0, 0, Fraction(1, 2)]), ("Y", "Z"))


@dataclass(frozen=True)
class CriticalRoot:
    interval: RootInterval | None
    value: Fraction | None
    approx: float
    curvature_sign: int


@dataclass(frozen=True)
class CriticalPoint:
    point: tuple[float, float]
    kind: str
    energy: float
    a: CriticalRoot
    b: CriticalRoot


def _sign_of_derivative_at_root(dp: UniPoly, ddp: UniPoly, iv: RootInterval) -> tuple[Fraction | None, int, float]:
    """Locate the root of ``dp`` in ``iv`` and the sign of ``ddp`` there."""
    from .poly import exact_rational_root

    exact = exact_rational_root(iv, dp)
    if exact is not None:
        v = ddp(exact)
        return exact, (v > 0) - (v < 0), float(exact)
    if not iv.simple or ddp.is_zero():
        return None, 0, float(refine_root(iv, dp, Fraction(1, 10**15)))
    seq = sturm_sequence(square_free_part(ddp)) if ddp.degree() > 0 else None
    sq = sturm_sequence(square_free_part(dp))
    lo, hi = iv.lo, iv.hi
    while seq is not None and count_roots(seq, lo, hi) > 0:
        mid = (lo + hi) / 2
        if count_roots(sq, lo, mid) == 1:
            hi = mid
        else:
            lo = mid
    v = ddp((lo + hi) / 2)
    return None, (v > 0) - (v < 0), float(refine_root(RootInterval(lo, hi, True), dp, Fraction(1, 10**15)))


def _critical_roots(p: UniPoly) -> list[CriticalRoot]:
    dp, ddp = p.derivative(), p.derivative(2)
    if dp.is_zero():
        raise ValidationError("Hamiltonian is constant in one variable: critical set not isolated")
    out = []
    for iv in isolate_real_roots(dp):
        exact, sign, approx = _sign_of_derivative_at_root(dp, ddp, iv)
        out.append(CriticalRoot(iv, exact, approx, sign))
    return out


def planar_critical_points(ham) -> list[CriticalPoint]:
    """Critical points of a separable planar Hamiltonian, classified by the Hessian.

    Accepts FieldParams (the ``(v, w)`` subsystem) or a SeparableHamiltonian.
    Definite Hessian: center; indefinite: saddle; singular: degenerate.
    """
    if isinstance(ham, FieldParams):
        ham = planar_hamiltonian(ham)
    out = []
    for ra in _critical_roots(ham.f):
        for rb in _critical_roots(ham.g):
            s = ra.curvature_sign * rb.curvature_sign
            kind = "center" if s > 0 else "saddle" if s < 0 else "degenerate"
            if ra.value is not None and rb.value is not None:
                energy = float(ham(ra.value, rb.value))
            else:
                energy = ham.f(ra.approx) + ham.g(rb.approx)
            out.append(CriticalPoint((ra.approx, rb.approx), kind, energy, ra, rb))
    return out


@dataclass(frozen=True)
class SectionPoint:
    x: float
    c: float

    def __post_init__(self):
        if not 0 < self.c < 4 / 3:
            raise ValidationError("section energy c must lie in (0, 4/3)")

    @property
    def z(self) -> float:
        return math.sqrt(2 * self.c)

    def state(self) -> np.ndarray:
        return np.array((self.x, 0.0, self.z))


@dataclass(frozen=True)
class ReturnRecord:
    start: SectionPoint
    return_point: SectionPoint
    return_time: float
    displacement: float
    c_drift: float
    end_state: tuple[float, float, float] = dc_field(default=(0.0, 0.0, 0.0))

    @property
    def closure(self) -> float:
        s = self.start.state()
        return float(np.linalg.norm(np.array(self.end_state) - s))


def _time_cap(c: float) -> float:
    gap = 4 / 3 - c
    return WINDOW if gap <= 0 else max(WINDOW, 20.0 * (1.0 - math.log(gap)))


def _first_return(start: np.ndarray, tol: float, cap: float, keep: list | None = None):
    for step in dopri5_steps(_unit_rhs, 0.0, start, cap, rtol=tol, atol=tol):
        if keep is not None:
            keep.append(step)
        if step.y0[1] < 0.0 <= step.y1[1]:
            lo, hi = step.t0, step.t1
            while hi - lo > TIME_TOL:
                mid = 0.5 * (lo + hi)
                if step(mid)[1] < 0.0:
                    lo = mid
                else:
                    hi = mid
            t_ret = 0.5 * (lo + hi)
            return t_ret, step(t_ret)
    return None, None


def return_map(c: float, x: float = 0.0, tol: float = 1e-12, time_cap: float | None = None) -> ReturnRecord:
    """First return of the unit system to ``{y = 0, z > 0}`` from ``(x, 0, sqrt(2c))``."""
    start = SectionPoint(float(x), float(c))
    cap = time_cap if time_cap is not None else _time_cap(float(c))
    t_ret, end = _first_return(start.state(), tol, cap)
    if t_ret is None:
        raise IntegrationError(f"left period annulus: no return within tau <= {cap}", t=cap)
    if not end[2] > 0:
        raise ConsistencyError("section crossing is not transversal (z <= 0)")
    c_ret = unit_energy(float(end[1]), float(end[2]))
    return ReturnRecord(
        start,
        SectionPoint(float(end[0]), c_ret),
        float(t_ret),
        float(end[0] - start.x),
        abs(c_ret - start.c),
        tuple(float(v) for v in end),
    )


def return_orbit(c: float, x: float = 0.0, tol: float = 1e-12) -> tuple[ReturnRecord, list[tuple[float, float, float, float]]]:
    """One return of the unit system plus the accepted step samples (tau, x, y, z)."""
    rec = return_map(c, x, tol)
    steps: list = []
    _first_return(rec.start.state(), tol, _time_cap(float(c)), steps)
    rows = [(0.0, *map(float, rec.start.state()))]
    for s in steps:
        if s.t1 >= rec.return_time:
            break
        rows.append((float(s.t1), *map(float, s.y1)))
    rows.append((rec.return_time, *rec.end_state))
    return rec, rows


@dataclass
class DisplacementProfile:
    records: list
    sign_changes: int
    monotonicity_violations: int

    @property
    def signs(self) -> list[int]:
        return [int(np.sign(r.displacement)) if isinstance(r, ReturnRecord) else 0 for r in self.records]


def displacement_profile(c_grid: Sequence[float], tol: float = 1e-12, noise: float = 1e-8) -> DisplacementProfile:
    """``L(0, c)`` on a grid; errors are kept per entry.

    Monotonicity is checked on the part of the grid inside ``(2/3, 4/3)``.
    """
    records: list = []
    for c in c_grid:
        try:
            records.append(return_map(c, 0.0, tol))
        except (IntegrationError, ValidationError, ConsistencyError) as exc:
            records.append(exc)
    ok = [r for r in records if isinstance(r, ReturnRecord)]
    signs = [np.sign(r.displacement) for r in ok]
    changes = sum(1 for a, b in zip(signs, signs[1:]) if a != b)
    inner = [r for r in ok if 2 / 3 < r.start.c < 4 / 3]
    violations = sum(1 for a, b in zip(inner, inner[1:]) if b.displacement < a.displacement - noise)
    return DisplacementProfile(records, changes, violations)


@dataclass(frozen=True)
class CStar:
    c_star: float
    z_star: float
    lo: float
    hi: float
    iterations: int


@functools.lru_cache(maxsize=16)
def find_cstar(tol_c: float = 1e-6, tol: float = 1e-12) -> CStar:
    """Bisection on the sign of ``L(0, c)`` over ``(2/3, 4/3)`` down to width ``tol_c``."""
    if tol_c <= 0:
        raise ValidationError("tol_c must be positive")
    lo, hi = CSTAR_BRACKET
    if not (return_map(lo, 0.0, tol).displacement < 0 < return_map(hi, 0.0, tol).displacement):
        raise ConsistencyError("no sign change of L(0, c) on the bracket")
    n = 0
    while hi - lo > tol_c:
        mid = 0.5 * (lo + hi)
        if return_map(mid, 0.0, tol).displacement < 0:
            lo = mid
        else:
            hi = mid
        n += 1
    c = 0.5 * (lo + hi)
    return CStar(c, math.sqrt(2 * c), lo, hi, n)


@dataclass
class IsochronyReport:
    c_star: float
    samples: list[dict]
    period: float
    period_spread: float
    isochronous: bool
    original_period: float | None = None
    original_start: tuple | None = None


def verify_isochronous_surface(
    c_star: float,
    x_samples: Sequence[float] = (-4.0, 0.0, 2.7),
    params: FieldParams | None = None,
    tol: float = 1e-12,
    closure_tol: float = CLOSURE_TOL,
    period_tol: float = PERIOD_TOL,
) -> IsochronyReport:
    """Check that orbits from ``(x, 0, sqrt(2 c*))`` close with a common period.

    With ``params`` (``mu < 0``) the representative orbit start and period are
    also reported in original coordinates and time, ``T = tau / sqrt(beta)``.
    """
    samples = []
    for x in x_samples:
        rec = return_map(c_star, x, tol)
        samples.append(
            {
                "x": float(x),
                "period": rec.return_time,
                "closure": rec.closure,
                "periodic": rec.closure <= closure_tol,
            }
        )
    periods = [s["period"] for s in samples]
    spread = max(periods) - min(periods)
    report = IsochronyReport(
        c_star,
        samples,
        periods[0],
        spread,
        all(s["periodic"] for s in samples) and spread <= period_tol,
    )
    if params is not None:
        red = reduce(params)
        if red.beta is None:
            raise ValidationError("params do not have mu < 0")
        normal = red.unit_to_normal((x_samples[0], 0.0, math.sqrt(2 * c_star)))
        orig = red.normal_to_original(tuple(Fraction(v) for v in normal))
        report.original_start = tuple(float(v) for v in orig)
        report.original_period = periods[0] / red.time_scale
    return report


@dataclass
class TrajectoryClass:
    outcome: str
    mu: Fraction | None
    evidence: dict


def _window_escape(f, start, radius=ESCAPE_RADIUS, window=WINDOW, tol=1e-10) -> dict:
    from .continuous import integrate

    tr = integrate(f, start, (-window, window), tol, escape_radius=radius)
    return {
        "integration_outcome": tr.outcome,
        "escape_time_forward": tr.escape_times["forward"],
        "escape_time_backward": tr.escape_times["backward"],
        "final_forward": tuple(float(v) for v in tr.states[-1]),
        "final_backward": tuple(float(v) for v in tr.states[0]),
        "window": window,
        "escape_radius": radius,
    }


def classify_trajectory(
    params: FieldParams,
    start: Sequence,
    frame: str = "original",
    surface_tol: float = 1e-6,
    evidence: bool = True,
) -> TrajectoryClass:
    """Long-time fate of a trajectory for ``d1 = d2 = 1``.

    ``frame`` is ``"original"`` or ``"unit"`` (coordinates of the rescaled
    ``mu < 0`` system).  Escape evidence is window-bounded and never more.
    """
    if params.d1 != 1 or params.d2 != 1:
        raise ValidationError("trajectory classification supports only deg P1 = deg P2 = 1")
    exact = all(isinstance(c, (int, Fraction)) for c in start)
    if params.a12 == 0:
        fwd, _ = linear_case_coordinates(params)
        X0, Y0, Z0 = fwd(tuple(Fraction(c) for c in start))
        ev: dict = {"normal_start": tuple(float(v) for v in (X0, Y0, Z0))}
        if Y0 == 0 and Z0 == 0 and params.A3 == 0:
            return TrajectoryClass("equilibrium", None, ev)
        if evidence:
            for t in (WINDOW, -WINDOW):
                ev[f"norm_at_t={t:g}"] = float(np.linalg.norm(explicit_flow_linear_case(params, tuple(map(float, start)), t)))
        return TrajectoryClass("escapes_both_directions", None, ev)
    red = reduce(params)
    if frame == "unit":
        if red.beta is None:
            raise ValidationError("unit frame exists only for mu < 0")
        normal = red.unit_to_normal(tuple(map(float, start)))
    elif frame == "original":
        pt = tuple(Fraction(c) for c in start) if exact else tuple(Fraction(float(c)) for c in start)
        normal = red.original_to_normal(pt)
    else:
        raise ValidationError(f"unknown frame {frame!r}")
    ev = {"mu": float(red.mu), "normal_start": tuple(float(v) for v in normal)}
    if red.mu > 0:
        if evidence:
            ev.update(_window_escape(normal_system(red.mu), tuple(map(float, normal))))
        return TrajectoryClass("escapes_both_directions", red.mu, ev)
    if red.mu == 0:
        Yn, Zn = normal[1], normal[2]
        H = Zn * Zn / 2 - Yn**3 / 3
        ev["H"] = float(H)
        if Yn == 0 and Zn == 0:
            # the singular line of the cusp consists of equilibria
            return TrajectoryClass("equilibrium", red.mu, ev)
        on = H == 0 if all(isinstance(v, Fraction) for v in (Yn, Zn)) and exact else abs(float(H)) <= 1e-12
        if on:
            return TrajectoryClass("on_cuspidal_surface", red.mu, ev)
        if evidence:
            ev.update(_window_escape(normal_system(red.mu), tuple(map(float, normal))))
        return TrajectoryClass("escapes_off_surface", red.mu, ev)
    unit = red.normal_to_unit(tuple(map(float, normal)))
    c = unit_energy(unit[1], unit[2])
    cs = find_cstar(1e-11)
    ev.update({"unit_start": unit, "c": c, "c_star": cs.c_star, "z_star": cs.z_star})
    in_annulus = 0 < c < 4 / 3 and unit[1] < 2
    ev["in_period_annulus"] = in_annulus
    if in_annulus and abs(c - cs.c_star) <= surface_tol:
        return TrajectoryClass("on_periodic_surface", red.mu, ev)
    if in_annulus:
        ev["x_drift_direction"] = "positive" if c > cs.c_star else "negative"
    if evidence:
        ev.update(_window_escape(UNIT_SYSTEM, unit))
    return TrajectoryClass("escapes_off_surface", red.mu, ev)
