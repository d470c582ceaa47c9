import random
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from nilflow import field
from nilflow.errors import ConsistencyError, ValidationError
from nilflow.field import (
    FieldParams,
    build_field,
    check_nilpotent,
    conjugate,
    conjugated_field_closed_form,
    conjugated_map_closed_form,
    normal_map_closed_form,
    psi2_automorphism,
    psi_automorphism,
    pushforward_field,
    random_params,
)
from nilflow.poly import TriPoly, UniPoly, X, Y, Z

seeds = st.integers(0, 10**6)


def test_validation_rejects_constant_polys():
    with pytest.raises(ValidationError, match="P1"):
        FieldParams(UniPoly([3]), UniPoly([0, 1]))
    with pytest.raises(ValidationError, match="P2"):
        FieldParams(UniPoly([0, 1]), UniPoly([]))


def test_validation_a12_with_high_degree_p2():
    with pytest.raises(ValidationError, match="A1.a12"):
        FieldParams(UniPoly([0, 1]), UniPoly([0, 0, 1]), a12=1)


def test_derived_constants():
    p = FieldParams(UniPoly([-3, -1, 1]), UniPoly([2, 3]), a10=1, a12=1, a20=2, A3=-6)
    assert (p.d1, p.d2) == (2, 1)
    assert p.kappa == Fraction(1, 3)
    # alpha = p20 + a10, nu = p21 A3 + a20 + alpha
    assert p.alpha == 3
    assert p.nu == 3 * -6 + 2 + 3


@given(seeds)
@settings(max_examples=25, deadline=None)
def test_random_fields_are_nilpotent(seed):
    rep = check_nilpotent(build_field(random_params(random.Random(seed))))
    assert rep.verdict and rep.coefficient_test and rep.cube_test


def test_nilpotency_against_sympy():
    params = FieldParams(UniPoly([1, -2, 1]), UniPoly([0, 3, 0, 1]), a10=2, a11=-1, a20=1, a21=5, A3=Fraction(1, 2))
    F = build_field(params)
    x, y, z = sp.symbols("x y z")
    exprs = [sp.sympify(c.to_str().replace("^", "**")) for c in F.components]
    J = sp.Matrix(exprs).jacobian([x, y, z])
    assert sp.expand(J**3) == sp.zeros(3, 3)
    assert sp.expand(J.trace()) == 0


def test_non_nilpotent_field_detected():
    F = field.PolyMap3((Y, Z, X))
    rep = check_nilpotent(F)
    assert not rep.verdict
    assert rep.determinant == TriPoly.const(1)


def test_tests_disagreeing_raise(monkeypatch):
    F = build_field(FieldParams(UniPoly([0, 1]), UniPoly([0, 1]), a12=1))
    monkeypatch.setattr(field, "matmul", lambda a, b: [[TriPoly.const(1)] * 3] * 3)
    with pytest.raises(ConsistencyError, match="disagree"):
        check_nilpotent(F)


@given(seeds)
@settings(max_examples=25, deadline=None)
def test_psi_is_automorphism(seed):
    params = random_params(random.Random(seed))
    psi = psi_automorphism(params)
    assert psi.after(psi.inverse).is_identity()
    assert psi.inverse.after(psi).is_identity()


@given(seeds)
@settings(max_examples=25, deadline=None)
def test_conjugation_closed_forms(seed):
    params = random_params(random.Random(seed), max_degree=3)
    F = build_field(params)
    psi = psi_automorphism(params)
    assert conjugate(F, psi) == conjugated_map_closed_form(params)
    assert pushforward_field(F, psi) == conjugated_field_closed_form(params)


@given(seeds)
@settings(max_examples=25, deadline=None)
def test_normal_form_closed_form(seed):
    params = random_params(random.Random(seed), branch="d2=1", max_degree=3)
    G = conjugated_map_closed_form(params)
    p2 = psi2_automorphism(params)
    assert p2.map.after(p2.map.inverse).is_identity()
    assert conjugate(G, p2.map) == normal_map_closed_form(params)


def test_conjugation_numerically_at_a_point():
    params = FieldParams(UniPoly([1, 2]), UniPoly([-1, 3]), a10=1, a11=2, a12=-1, a20=3, a21=1, A3=2)
    F = build_field(params)
    psi = psi_automorphism(params)
    p = (Fraction(1, 2), Fraction(-3, 7), Fraction(2))
    lhs = psi.inverse(F(psi(p)))
    assert lhs == conjugated_map_closed_form(params)(p)


def test_psi2_requires_linear_p2():
    params = FieldParams(UniPoly([0, 1]), UniPoly([0, 0, 1]))
    with pytest.raises(ValidationError, match="deg P2 = 1"):
        psi2_automorphism(params)


def test_conjugate_needs_inverse():
    with pytest.raises(ValidationError):
        conjugate(field.IDENTITY, field.PolyMap3((X, Y, Z)))


def test_linear_p1_normal_map():
    params = FieldParams(UniPoly([0, 1]), UniPoly([0, 1]), a12=1)
    N = normal_map_closed_form(params)
    assert N.components == (Y - Z, Z, (Y - Z) * (Y - Z))
