"""Nilpotent fields of the triangular family and their conjugating automorphisms."""

from __future__ import annotations

import random
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Callable, Sequence

from .errors import ConsistencyError, ValidationError
from .poly import TriPoly, UniPoly, X, Y, Z, as_rational


@dataclass(frozen=True)
class FieldParams:
    """Parameters ``P1, P2, A1 = a10 + a11 x + a12 x^2, A2 = a20 + a21 x, A3``."""

    P1: UniPoly
    P2: UniPoly
    a10: Fraction = Fraction(0)
    a11: Fraction = Fraction(0)
    a12: Fraction = Fraction(0)
    a20: Fraction = Fraction(0)
    a21: Fraction = Fraction(0)
    A3: Fraction = Fraction(0)
    label: str = dc_field(default="", compare=False)

    def __post_init__(self):
        for name in ("P1", "P2"):
            p = getattr(self, name)
            if not isinstance(p, UniPoly):
                object.__setattr__(self, name, UniPoly(p))
        for name in ("a10", "a11", "a12", "a20", "a21", "A3"):
            object.__setattr__(self, name, as_rational(getattr(self, name)))
        if self.P1.degree() < 1:
            raise ValidationError("P1: degree must be at least 1")
        if self.P2.degree() < 1:
            raise ValidationError("P2: degree must be at least 1")
        if self.P2.degree() > 1 and self.a12 != 0:
            raise ValidationError(
                "A1.a12: deg P2 > 1 requires A1'' = 0, i.e. a12 = 0 (validity condition on A1)"
            )

    @property
    def d1(self) -> int:
        return self.P1.degree()

    @property
    def d2(self) -> int:
        return self.P2.degree()

    @property
    def p_d1(self) -> Fraction:
        return self.P1.leading

    @property
    def p_d2(self) -> Fraction:
        return self.P2.leading

    @property
    def kappa(self) -> Fraction:
        """``1 / (d2 * p_d2)``, the scale multiplying ``A2`` everywhere."""
        return 1 / (self.d2 * self.p_d2)

    @property
    def A1(self) -> UniPoly:
        return UniPoly([self.a10, self.a11, self.a12])

    @property
    def A2(self) -> UniPoly:
        return UniPoly([self.a20, self.a21])

    @property
    def alpha(self) -> Fraction:
        if self.d2 != 1:
            raise ValidationError("alpha is defined only for deg P2 = 1")
        return self.P2[0] + self.a10

    @property
    def nu(self) -> Fraction:
        if self.d2 != 1:
            raise ValidationError("nu is defined only for deg P2 = 1")
        return self.P2[1] * self.A3 + self.a20 + self.alpha

    def replace(self, **changes) -> "FieldParams":
        kw = {k: getattr(self, k) for k in ("P1", "P2", "a10", "a11", "a12", "a20", "a21", "A3", "label")}
        kw.update(changes)
        return FieldParams(**kw)


@dataclass(frozen=True)
class PolyMap3:
    """Polynomial self-map of 3-space, optionally carrying an exact inverse."""

    components: tuple[TriPoly, TriPoly, TriPoly]
    inverse: "PolyMap3 | None" = dc_field(default=None, compare=False, repr=False)

    def __post_init__(self):
        comps = tuple(c if isinstance(c, TriPoly) else TriPoly.const(c) for c in self.components)
        if len(comps) != 3:
            raise ValueError("PolyMap3 needs exactly three components")
        object.__setattr__(self, "components", comps)

    def __getitem__(self, i: int) -> TriPoly:
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    def __call__(self, p: Sequence):
        return tuple(c(*p) for c in self.components)

    def after(self, inner: "PolyMap3") -> "PolyMap3":
        """``self o inner``."""
        comps = tuple(c.substitute(inner.components) for c in self.components)
        inv = None
        if self.inverse is not None and inner.inverse is not None:
            inv = PolyMap3(tuple(c.substitute(self.inverse.components) for c in inner.inverse.components))
        return PolyMap3(comps, inv)

    def jacobian(self) -> list[list[TriPoly]]:
        return [[c.diff(j) for j in range(3)] for c in self.components]

    def with_inverse(self, inverse: "PolyMap3") -> "PolyMap3":
        return PolyMap3(self.components, PolyMap3(inverse.components, self))

    def is_identity(self) -> bool:
        return self.components == (X, Y, Z)

    def to_strs(self, names=("x", "y", "z")) -> list[str]:
        return [c.to_str(names) for c in self.components]


IDENTITY = PolyMap3((X, Y, Z))


def build_field(params: FieldParams) -> PolyMap3:
    """The nilpotent field ``(F1, F2, F3)`` attached to ``params``."""
    k = params.kappa
    A1 = params.A1.to_tripoly(0)
    A2 = params.A2.to_tripoly(0)
    dA1 = params.A1.derivative().to_tripoly(0)
    ddA1 = params.A1.derivative(2).to_tripoly(0)
    dA2 = params.A2.derivative().to_tripoly(0)
    F1 = params.P1(Y + A1)
    F2 = params.P2(Z + A2 * k) - dA1 * F1
    F3 = -k * (ddA1 * F1 * F1 * Fraction(-1, 2) + dA2 * F1) + params.A3
    return PolyMap3((F1, F2, F3))


def _det3(m):
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


def matmul(a, b):
    return [
        [sum((a[i][k] * b[k][j] for k in range(3)), TriPoly()) for j in range(3)]
        for i in range(3)
    ]


@dataclass(frozen=True)
class NilpotencyReport:
    trace: TriPoly
    minor_sum: TriPoly
    determinant: TriPoly
    cube: list
    verdict: bool

    @property
    def coefficient_test(self) -> bool:
        return self.trace.is_zero() and self.minor_sum.is_zero() and self.determinant.is_zero()

    @property
    def cube_test(self) -> bool:
        return all(e.is_zero() for row in self.cube for e in row)


def check_nilpotent(F: PolyMap3) -> NilpotencyReport:
    """Decide nilpotency of ``JF`` exactly, by two independent routes.

    Raises ConsistencyError if the characteristic-coefficient test and the
    ``(JF)^3 = 0`` test disagree.
    """
    J = F.jacobian()
    trace = J[0][0] + J[1][1] + J[2][2]
    minors = (
        (J[0][0] * J[1][1] - J[0][1] * J[1][0])
        + (J[0][0] * J[2][2] - J[0][2] * J[2][0])
        + (J[1][1] * J[2][2] - J[1][2] * J[2][1])
    )
    det = _det3(J)
    cube = matmul(matmul(J, J), J)
    report = NilpotencyReport(trace, minors, det, cube, False)
    coeff, cub = report.coefficient_test, report.cube_test
    if coeff != cub:
        raise ConsistencyError(
            f"nilpotency tests disagree: characteristic coefficients={coeff}, cube={cub}"
        )
    return NilpotencyReport(trace, minors, det, cube, coeff)


def psi_automorphism(params: FieldParams) -> PolyMap3:
    """``(u, v, w) -> (u, v - A1(u), w - A2(u)/(d2 p_d2))`` with its inverse."""
    k = params.kappa
    A1 = params.A1.to_tripoly(0)
    A2 = params.A2.to_tripoly(0)
    fwd = PolyMap3((X, Y - A1, Z - A2 * k))
    inv = PolyMap3((X, Y + A1, Z + A2 * k))
    return fwd.with_inverse(inv)


def conjugate(F: PolyMap3, T: PolyMap3) -> PolyMap3:
    """Map conjugate ``T^-1 o F o T``."""
    if T.inverse is None:
        raise ValidationError("conjugation needs an automorphism with a known inverse")
    return T.inverse.after(F.after(T))


def pushforward_field(F: PolyMap3, T: PolyMap3) -> PolyMap3:
    """Vector field ``F`` rewritten in the coordinates ``p`` where ``T(p)`` is the old point.

    ``G(p) = J(T^-1)(T(p)) . F(T(p))``; exact because ``T^-1`` is polynomial.
    """
    if T.inverse is None:
        raise ValidationError("change of coordinates needs a known inverse")
    Jinv = T.inverse.jacobian()
    FT = [c.substitute(T.components) for c in F.components]
    comps = []
    for i in range(3):
        row = [Jinv[i][j].substitute(T.components) for j in range(3)]
        comps.append(row[0] * FT[0] + row[1] * FT[1] + row[2] * FT[2])
    return PolyMap3(tuple(comps))


def conjugated_map_closed_form(params: FieldParams) -> PolyMap3:
    """Closed form of the discrete map in the ``Psi`` frame."""
    k = params.kappa
    P1v = params.P1(Y)
    u = P1v
    v = params.P2(Z) + params.a12 * P1v * (P1v - X * 2) + params.a10
    w = P1v * P1v * (params.a12 * k) + params.A3 + params.a20 * k
    return PolyMap3((u, v, w))


def conjugated_field_closed_form(params: FieldParams) -> PolyMap3:
    """Closed form of the differential system in the ``Psi`` frame."""
    k = params.kappa
    P1v = params.P1(Y)
    return PolyMap3((P1v, params.P2(Z), P1v * P1v * (params.a12 * k) + params.A3))


@dataclass(frozen=True)
class Psi2:
    """Second automorphism (``deg P2 = 1``) with its derived constants."""

    map: PolyMap3
    alpha: Fraction
    nu: Fraction


def psi2_automorphism(params: FieldParams) -> Psi2:
    """``(X, Y, Z) -> (X + P1(Y), Y, (Z + a12 P1(Y)(P1(Y) + 2X) - alpha) / p21)``."""
    if params.d2 != 1:
        raise ValidationError("P2: the second automorphism requires deg P2 = 1")
    p21 = params.P2[1]
    alpha = params.alpha
    a12 = params.a12
    P1Y = params.P1(Y)
    fwd = PolyMap3((X + P1Y, Y, (Z + a12 * P1Y * (P1Y + X * 2) - alpha) * (1 / p21)))
    # inverse: (u, v, w) -> (u - P1(v), v, p21 w - a12 P1(v)(2u - P1(v)) + alpha)
    inv = PolyMap3((X - P1Y, Y, Z * p21 - a12 * P1Y * (X * 2 - P1Y) + alpha))
    return Psi2(fwd.with_inverse(inv), alpha, params.nu)


def normal_map_closed_form(params: FieldParams) -> PolyMap3:
    """``(X, Y, Z) -> (P1(Y) - P1(Z), Z, a12 (P1(Y) - P1(Z))^2 + nu)``."""
    D = params.P1(Y) - params.P1(Z)
    return PolyMap3((D, Z, D * D * params.a12 + params.nu))


def random_rational(rng: random.Random, lo: int = -5, hi: int = 5, max_den: int = 3) -> Fraction:
    return Fraction(rng.randint(lo * max_den, hi * max_den), rng.randint(1, max_den))


def random_unipoly(rng: random.Random, degree: int, **kw) -> UniPoly:
    cs = [random_rational(rng, **kw) for _ in range(degree)]
    lead = Fraction(0)
    while lead == 0:
        lead = random_rational(rng, **kw)
    return UniPoly(cs + [lead])


def random_params(
    rng: random.Random,
    branch: str | None = None,
    max_degree: int = 4,
    a12_zero: bool | None = None,
) -> FieldParams:
    """Random valid parameters (coefficients in [-5, 5]).

    ``branch`` is ``"d2=1"``, ``"d2>1"`` or None (either).  ``a12_zero``
    forces ``a12 = 0`` (True) or ``a12 != 0`` (False, only with ``d2 = 1``).
    """
    if branch is None:
        branch = rng.choice(["d2=1", "d2>1"]) if a12_zero is not False else "d2=1"
    d1 = rng.randint(1, max_degree)
    d2 = 1 if branch == "d2=1" else rng.randint(2, max(2, max_degree))
    P1 = random_unipoly(rng, d1)
    P2 = random_unipoly(rng, d2)
    if d2 > 1 or a12_zero:
        a12 = Fraction(0)
    else:
        a12 = random_rational(rng)
        while a12_zero is False and a12 == 0:
            a12 = random_rational(rng)
    return FieldParams(
        P1,
        P2,
        a10=random_rational(rng),
        a11=random_rational(rng),
        a12=a12,
        a20=random_rational(rng),
        a21=random_rational(rng),
        A3=random_rational(rng),
    )
