"""Float evaluation of exact polynomials, and output rounding."""

from __future__ import annotations

import math
from typing import Callable, Sequence

from .poly import TriPoly


def _expr(p: TriPoly) -> str:
    if p.is_zero():
        return "0.0"
    terms = []
    for (i, j, k), c in sorted(p.terms.items()):
        factors = [repr(float(c))]
        for name, e in (("x", i), ("y", j), ("z", k)):
            if e == 1:
                factors.append(name)
            elif e > 1:
                factors.append(f"{name}**{e}")
        terms.append("*".join(factors))
    return " + ".join(terms)


def lambdify(polys: Sequence[TriPoly]) -> Callable[[float, float, float], tuple]:
    """Compile polynomials to a float function ``f(x, y, z) -> tuple``.

    Exponent overflow surfaces as OverflowError from Python floats.
    """
    body = ", ".join(_expr(p) for p in polys)
    src = f"def _f(x, y, z):\n    return ({body},)\n"
    ns: dict = {}
    exec(src, ns)  # noqa: S102 - source is generated from exact coefficients only
    return ns["_f"]


def lambdify_jacobian(polys: Sequence[TriPoly]) -> Callable[[float, float, float], tuple]:
    """Flattened row-major Jacobian of ``polys`` as a float function."""
    return lambdify([p.diff(j) for p in polys for j in range(3)])


def round_sig(x: float, digits: int = 15) -> float:
    """Round to ``digits`` significant digits (round-half-even on the decimal expansion)."""
    if x == 0 or not math.isfinite(x):
        return x
    return float(format(x, f".{digits}g"))


def fmt(x: float, digits: int = 15) -> str:
    return format(x, f".{digits}g")
