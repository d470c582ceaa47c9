"""Exact polynomials in one and three variables.

Coefficients are :class:`fractions.Fraction` throughout.  ``UniPoly`` is a
dense univariate polynomial (ascending coefficients), ``TriPoly`` a sparse
polynomial in ``x, y, z`` keyed by exponent triples.  Real roots of
univariate polynomials are isolated exactly with Sturm sequences.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational as _RationalABC
from typing import Iterable, Mapping, Sequence

Rational = Fraction

Exp = tuple[int, int, int]

VARS = ("x", "y", "z")


def as_rational(value) -> Fraction:
    """Convert ints, Fractions, ``"p/q"`` strings and floats (exactly) to Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not coefficients")
    if isinstance(value, (int, _RationalABC)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a rational")


def _fmt_coeff(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


class UniPoly:
    """Univariate polynomial with exact coefficients in ascending order."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        cs = [as_rational(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        self.coeffs: tuple[Fraction, ...] = tuple(cs)

    @classmethod
    def const(cls, c) -> "UniPoly":
        return cls([c])

    @classmethod
    def monomial(cls, n: int, c=1) -> "UniPoly":
        return cls([0] * n + [c])

    @classmethod
    def s(cls) -> "UniPoly":
        return cls([0, 1])

    def degree(self) -> int:
        """Degree; the zero polynomial has degree -1."""
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def leading(self) -> Fraction:
        return self.coeffs[-1] if self.coeffs else Fraction(0)

    def __getitem__(self, i: int) -> Fraction:
        return self.coeffs[i] if 0 <= i < len(self.coeffs) else Fraction(0)

    def __eq__(self, other) -> bool:
        if isinstance(other, UniPoly):
            return self.coeffs == other.coeffs
        if isinstance(other, (int, Fraction)):
            return self.coeffs == UniPoly([other]).coeffs
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __repr__(self) -> str:
        return f"UniPoly({self.to_str('s')!r})"

    def to_str(self, var: str = "s") -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for n in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[n]
            if c == 0:
                continue
            mono = "" if n == 0 else (var if n == 1 else f"{var}^{n}")
            parts.append(_term_str(c, mono))
        return _join_terms(parts)

    def _coerce(self, other) -> "UniPoly":
        if isinstance(other, UniPoly):
            return other
        return UniPoly([other])

    def __add__(self, other) -> "UniPoly":
        o = self._coerce(other)
        n = max(len(self.coeffs), len(o.coeffs))
        return UniPoly([self[i] + o[i] for i in range(n)])

    __radd__ = __add__

    def __neg__(self) -> "UniPoly":
        return UniPoly([-c for c in self.coeffs])

    def __sub__(self, other) -> "UniPoly":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "UniPoly":
        return self._coerce(other) - self

    def __mul__(self, other) -> "UniPoly":
        if not isinstance(other, UniPoly):
            c = as_rational(other)
            return UniPoly([c * a for a in self.coeffs])
        if self.is_zero() or other.is_zero():
            return UniPoly()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return UniPoly(out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "UniPoly":
        if n < 0:
            raise ValueError("negative power")
        result = UniPoly([1])
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __call__(self, value):
        """Horner evaluation; works for numbers, UniPoly and TriPoly arguments."""
        if isinstance(value, TriPoly):
            acc = TriPoly()
            for c in reversed(self.coeffs):
                acc = acc * value + c
            return acc
        if isinstance(value, UniPoly):
            acc = UniPoly()
            for c in reversed(self.coeffs):
                acc = acc * value + c
            return acc
        if isinstance(value, float):
            acc = 0.0
            for c in reversed(self.coeffs):
                acc = acc * value + float(c)
            return acc
        acc = Fraction(0) if isinstance(value, (int, Fraction)) else 0
        for c in reversed(self.coeffs):
            acc = acc * value + c
        return acc

    def derivative(self, order: int = 1) -> "UniPoly":
        p = self
        for _ in range(order):
            p = UniPoly([i * c for i, c in enumerate(p.coeffs)][1:])
        return p

    def antiderivative(self) -> "UniPoly":
        """Antiderivative with zero integration constant."""
        if self.is_zero():
            return UniPoly()
        return UniPoly([0] + [c / (i + 1) for i, c in enumerate(self.coeffs)])

    def monic(self) -> "UniPoly":
        if self.is_zero():
            return self
        return self * (1 / self.leading)

    def divmod(self, other: "UniPoly") -> tuple["UniPoly", "UniPoly"]:
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dq = len(rem) - len(other.coeffs)
        if dq < 0:
            return UniPoly(), self
        quot = [Fraction(0)] * (dq + 1)
        lead = other.leading
        for k in range(dq, -1, -1):
            c = rem[k + len(other.coeffs) - 1] / lead
            quot[k] = c
            if c:
                for j, b in enumerate(other.coeffs):
                    rem[k + j] -= c * b
        return UniPoly(quot), UniPoly(rem[: len(other.coeffs) - 1])

    def __floordiv__(self, other: "UniPoly") -> "UniPoly":
        return self.divmod(other)[0]

    def __mod__(self, other: "UniPoly") -> "UniPoly":
        return self.divmod(other)[1]

    def to_float_coeffs(self) -> list[float]:
        return [float(c) for c in self.coeffs]

    def to_tripoly(self, var: int = 0) -> "TriPoly":
        """Embed as a polynomial in coordinate ``var`` (0, 1, 2 for x, y, z)."""
        terms = {}
        for n, c in enumerate(self.coeffs):
            if c:
                e = [0, 0, 0]
                e[var] = n
                terms[tuple(e)] = c
        return TriPoly(terms)


def poly_gcd(a: UniPoly, b: UniPoly) -> UniPoly:
    """Monic greatest common divisor (zero if both are zero)."""
    while not b.is_zero():
        a, b = b, a % b
    return a.monic()


def compose(outer: UniPoly, inner):
    """``outer(inner)`` for a UniPoly or TriPoly ``inner``."""
    return outer(inner)


def square_free_part(p: UniPoly) -> UniPoly:
    if p.is_zero():
        raise ValueError("indeterminate roots: zero polynomial")
    g = poly_gcd(p, p.derivative())
    return (p // g).monic()


def sturm_sequence(p: UniPoly) -> list[UniPoly]:
    seq = [p, p.derivative()]
    while not seq[-1].is_zero():
        r = seq[-2] % seq[-1]
        if r.is_zero():
            break
        seq.append(-r)
    return [q for q in seq if not q.is_zero()]


def _sign(v) -> int:
    return (v > 0) - (v < 0)


def sign_variations(seq: Sequence[UniPoly], at: Fraction) -> int:
    signs = [s for s in (_sign(q(at)) for q in seq) if s]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def count_roots(seq: Sequence[UniPoly], lo: Fraction, hi: Fraction) -> int:
    """Number of distinct real roots in ``(lo, hi]`` (Sturm's theorem)."""
    return sign_variations(seq, lo) - sign_variations(seq, hi)


def cauchy_bound(p: UniPoly) -> Fraction:
    lead = abs(p.leading)
    return 1 + max((abs(c) / lead for c in p.coeffs[:-1]), default=Fraction(0))


@dataclass(frozen=True)
class RootInterval:
    """Half-open interval ``(lo, hi]`` holding exactly one real root."""

    lo: Fraction
    hi: Fraction
    simple: bool

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("RootInterval requires lo < hi")

    def contains(self, value) -> bool:
        return self.lo < value <= self.hi

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2


def isolate_real_roots(p: UniPoly) -> list[RootInterval]:
    """Disjoint isolating intervals, one per distinct real root, sorted ascending."""
    if p.is_zero():
        raise ValueError("indeterminate roots: zero polynomial")
    if p.degree() == 0:
        return []
    q = square_free_part(p)
    seq = sturm_sequence(q)
    g = poly_gcd(p, p.derivative())
    gseq = sturm_sequence(g) if g.degree() > 0 else None
    b = cauchy_bound(q)
    out: list[RootInterval] = []
    stack = [(-b, b)]
    while stack:
        lo, hi = stack.pop()
        n = count_roots(seq, lo, hi)
        if n == 0:
            continue
        if n == 1:
            simple = gseq is None or count_roots(gseq, lo, hi) == 0
            out.append(RootInterval(lo, hi, simple))
            continue
        mid = (lo + hi) / 2
        stack.append((mid, hi))
        stack.append((lo, mid))
    out.sort(key=lambda r: r.lo)
    return out


def refine_root(interval: RootInterval, p: UniPoly, tol) -> Fraction:
    """Bisect ``interval`` until its width is at most ``tol``; return the midpoint.

    An exact root hit during bisection is returned as is.
    """
    tol = as_rational(tol)
    if tol <= 0:
        raise ValueError("tol must be positive")
    q = square_free_part(p)
    seq = sturm_sequence(q)
    lo, hi = interval.lo, interval.hi
    if q(hi) == 0:
        return hi
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if q(mid) == 0:
            return mid
        if count_roots(seq, lo, mid) == 1:
            hi = mid
        else:
            lo = mid
    return (lo + hi) / 2


def exact_rational_root(interval: RootInterval, p: UniPoly, max_den: int = 10**6):
    """Return the root in ``interval`` if it is a rational with small denominator, else None."""
    approx = refine_root(interval, p, Fraction(1, 10**15))
    cand = approx.limit_denominator(max_den)
    if interval.contains(cand) and p(cand) == 0:
        return cand
    return None


def _term_str(c: Fraction, mono: str) -> str:
    if not mono:
        return _fmt_coeff(c)
    if c == 1:
        return mono
    if c == -1:
        return "-" + mono
    return f"{_fmt_coeff(c)}*{mono}"


def _join_terms(parts: list[str]) -> str:
    out = parts[0]
    for t in parts[1:]:
        out += " - " + t[1:] if t.startswith("-") else " + " + t
    return out


class TriPoly:
    """Sparse polynomial in x, y, z with exact coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Exp, object] | None = None):
        t: dict[Exp, Fraction] = {}
        if terms:
            for e, c in terms.items():
                c = as_rational(c)
                if c:
                    t[tuple(e)] = c
        self.terms = t

    @classmethod
    def _raw(cls, terms: dict) -> "TriPoly":
        obj = cls.__new__(cls)
        obj.terms = terms
        return obj

    @classmethod
    def const(cls, c) -> "TriPoly":
        return cls({(0, 0, 0): c})

    @classmethod
    def var(cls, i: int) -> "TriPoly":
        e = [0, 0, 0]
        e[i] = 1
        return cls({tuple(e): 1})

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(e == (0, 0, 0) for e in self.terms)

    def constant_term(self) -> Fraction:
        return self.terms.get((0, 0, 0), Fraction(0))

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def variables(self) -> set[int]:
        return {i for e in self.terms for i in range(3) if e[i]}

    def __eq__(self, other) -> bool:
        if isinstance(other, TriPoly):
            return self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self.terms == TriPoly.const(other).terms
        return NotImplemented

    def __hash__(self) -> int:
        return hash(frozenset(self.terms.items()))

    def __repr__(self) -> str:
        return f"TriPoly({self.to_str()!r})"

    def to_str(self, names: Sequence[str] = VARS) -> str:
        if not self.terms:
            return "0"
        parts = []
        for e in sorted(self.terms, key=lambda e: (-sum(e), tuple(-k for k in e))):
            mono = "*".join(
                n if k == 1 else f"{n}^{k}" for n, k in zip(names, e) if k
            )
            parts.append(_term_str(self.terms[e], mono))
        return _join_terms(parts)

    def _coerce(self, other) -> "TriPoly":
        if isinstance(other, TriPoly):
            return other
        if isinstance(other, UniPoly):
            raise TypeError("embed UniPoly explicitly with to_tripoly()")
        return TriPoly.const(other)

    def __add__(self, other) -> "TriPoly":
        o = self._coerce(other)
        t = dict(self.terms)
        for e, c in o.terms.items():
            v = t.get(e, 0) + c
            if v:
                t[e] = v
            else:
                t.pop(e, None)
        return TriPoly._raw(t)

    __radd__ = __add__

    def __neg__(self) -> "TriPoly":
        return TriPoly._raw({e: -c for e, c in self.terms.items()})

    def __sub__(self, other) -> "TriPoly":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "TriPoly":
        return self._coerce(other) - self

    def __mul__(self, other) -> "TriPoly":
        if not isinstance(other, TriPoly):
            c = as_rational(other)
            if c == 0:
                return TriPoly()
            return TriPoly._raw({e: c * v for e, v in self.terms.items()})
        t: dict[Exp, Fraction] = {}
        for (a0, a1, a2), ca in self.terms.items():
            for (b0, b1, b2), cb in other.terms.items():
                e = (a0 + b0, a1 + b1, a2 + b2)
                t[e] = t.get(e, 0) + ca * cb
        return TriPoly._raw({e: c for e, c in t.items() if c})

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "TriPoly":
        if n < 0:
            raise ValueError("negative power")
        result = TriPoly.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def diff(self, i: int) -> "TriPoly":
        """Partial derivative with respect to coordinate ``i``."""
        t = {}
        for e, c in self.terms.items():
            k = e[i]
            if k:
                e2 = list(e)
                e2[i] = k - 1
                t[tuple(e2)] = c * k
        return TriPoly._raw(t)

    def gradient(self) -> tuple["TriPoly", "TriPoly", "TriPoly"]:
        return (self.diff(0), self.diff(1), self.diff(2))

    def __call__(self, x, y, z):
        """Evaluate at a point; exact for rationals, float for floats."""
        if any(isinstance(v, float) for v in (x, y, z)):
            x, y, z = float(x), float(y), float(z)
            return sum(float(c) * x ** e[0] * y ** e[1] * z ** e[2] for e, c in self.terms.items())
        total = Fraction(0)
        for (i, j, k), c in self.terms.items():
            total += c * x**i * y**j * z**k
        return total

    def substitute(self, images: Sequence["TriPoly"]) -> "TriPoly":
        """Compose: replace x, y, z by the polynomials in ``images``."""
        images = [img if isinstance(img, TriPoly) else TriPoly.const(img) for img in images]
        cache: list[dict[int, TriPoly]] = [{0: TriPoly.const(1)} for _ in range(3)]

        def power(i: int, k: int) -> TriPoly:
            c = cache[i]
            if k not in c:
                c[k] = power(i, k - 1) * images[i]
            return c[k]

        out = TriPoly()
        for (i, j, k), c in self.terms.items():
            out = out + power(0, i) * power(1, j) * power(2, k) * c
        return out

    def to_unipoly(self, var: int) -> UniPoly:
        """Inverse of :meth:`UniPoly.to_tripoly`; fails if other variables occur."""
        coeffs: dict[int, Fraction] = {}
        for e, c in self.terms.items():
            if any(e[i] for i in range(3) if i != var):
                raise ValueError("polynomial depends on other variables")
            coeffs[e[var]] = c
        n = max(coeffs, default=-1)
        return UniPoly([coeffs.get(i, 0) for i in range(n + 1)])

    def float_terms(self) -> list[tuple[float, int, int, int]]:
        return [(float(c), i, j, k) for (i, j, k), c in sorted(self.terms.items())]


X = TriPoly.var(0)
Y = TriPoly.var(1)
Z = TriPoly.var(2)


def cross(a: Sequence[TriPoly], b: Sequence[TriPoly]) -> tuple[TriPoly, TriPoly, TriPoly]:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def parse_unipoly(coeffs: Iterable) -> UniPoly:
    return UniPoly([as_rational(c) for c in coeffs])
