import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nilflow import discrete
from nilflow.discrete import (
    certify_no_2cycles,
    classify_cycle,
    classify_multiplier,
    closed_form_L22,
    dynamics_frame,
    find_3cycle,
    find_cycles_numeric,
    fixed_point,
    h_polynomial,
    iterate,
)
from nilflow.errors import ConsistencyError, ValidationError
from nilflow.field import FieldParams, build_field, random_params
from nilflow.numeric import lambdify
from nilflow.poly import UniPoly
from oracles import fd_jacobian

LINEAR = FieldParams(UniPoly([0, 1]), UniPoly([0, 1]), a12=1)
ATTRACTING = FieldParams(UniPoly([0, Fraction(-5, 2), 1]), UniPoly([0, 1]), a12=-3, A3=2)


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_fixed_point_is_fixed_in_all_frames(seed):
    params = random_params(random.Random(seed), max_degree=3)
    fp = fixed_point(params)
    assert build_field(params)(fp.original) == fp.original
    frame = dynamics_frame(params)
    target = fp.normal if frame.name == "normal" else fp.conjugated
    assert frame.map(target) == target
    assert frame.chart(target) == fp.original


def test_iterate_exact_and_float():
    orb = iterate(build_field(LINEAR), (1, 0, 1), 3)
    assert orb[0].exact and len(orb) == 4
    assert orb[3].coords == orb[0].coords
    forb = iterate(build_field(LINEAR), (0.1, 0.2, 0.3), 4)
    assert not forb[0].exact and not forb.diverged


def test_iterate_flags_divergence():
    params = FieldParams(UniPoly([0, 0, 2]), UniPoly([0, 1]), a12=1)
    orb = iterate(dynamics_frame(params).map, (5.0, 7.0, 9.0), 60)
    assert orb.diverged
    assert all(np.isfinite(p.coords).all() for p in orb)


def test_iterate_rejects_negative_steps():
    with pytest.raises(ValidationError):
        iterate(build_field(LINEAR), (0, 0, 0), -1)


@given(st.integers(0, 10**6))
@settings(max_examples=10, deadline=None)
def test_a12_zero_reaches_fixed_point_in_three_steps(seed):
    rng = random.Random(seed)
    params = random_params(rng, a12_zero=True, max_degree=3)
    start = tuple(Fraction(rng.randint(-9, 9), rng.randint(1, 4)) for _ in range(3))
    orb = iterate(build_field(params), start, 3)
    assert orb[3].coords == fixed_point(params).original


def test_no_2cycle_certificate_cases():
    cert = certify_no_2cycles(LINEAR, n_starts=30)
    assert cert.holds and all(cert.identities.values())
    high = FieldParams(UniPoly([1, 1]), UniPoly([0, 1, 0, 2]), a10=1, A3=1)
    cert = certify_no_2cycles(high, n_starts=30)
    assert cert.holds and cert.case != certify_no_2cycles(LINEAR, n_starts=5).case


def test_no_2cycle_search_detects_planted_cycle(monkeypatch):
    # a map with a genuine 2-cycle in place of the normal map must be caught
    from nilflow.field import PolyMap3
    from nilflow.poly import X, Y, Z

    swap = PolyMap3((Y, X, Z * 0))
    real = discrete.dynamics_frame

    def corrupted(params):
        fr = real(params)
        return discrete.Frame(fr.name, swap, fr.chart)

    monkeypatch.setattr(discrete, "dynamics_frame", corrupted)
    with pytest.raises(ConsistencyError):
        certify_no_2cycles(LINEAR, n_starts=20)


def test_h_polynomial_linear_case():
    # P1 = s, a12 = 1, nu = 0: h(s) = s^2 - s
    assert h_polynomial(LINEAR) == UniPoly([0, -1, 1])


def test_three_cycle_witness():
    (cyc,) = find_3cycle(LINEAR)
    assert cyc.exact and cyc.s0 == 1
    assert [p.coords for p in cyc.points] == [(0, 1, 0), (1, 0, 1), (-1, 1, 1)]
    assert cyc.multiplier == 4 and cyc.classification == "saddle"
    # the cycle is a genuine 3-cycle of the original map
    F = build_field(LINEAR)
    p = cyc.original_points[0].coords
    assert F(F(F(p))) == p and F(p) != p


def test_three_cycle_multiplier_against_finite_differences():
    cycles = find_3cycle(ATTRACTING)
    assert [c.classification for c in cycles].count("attractor") == 1
    f = lambdify(dynamics_frame(ATTRACTING).map.components)

    def third(x, y, z):
        return f(*f(*f(x, y, z)))

    for cyc in cycles:
        p = cyc.points[0].as_float()
        assert np.allclose(third(*p), p, atol=1e-9)
        J = fd_jacobian(third, p)
        assert J[1, 1] == pytest.approx(float(cyc.multiplier), rel=1e-5)


def test_three_cycle_requires_case():
    with pytest.raises(ValidationError, match="3-cycle"):
        find_3cycle(FieldParams(UniPoly([0, 1]), UniPoly([0, 1])))


def test_classify_cycle_rejects_tampered_point():
    (cyc,) = find_3cycle(LINEAR)
    cyc.s0 = Fraction(2)
    with pytest.raises(ConsistencyError):
        classify_cycle(LINEAR, cyc)


def test_classify_multiplier():
    assert classify_multiplier(0.5) == "attractor"
    assert classify_multiplier(4) == "saddle"
    assert classify_multiplier(-1) == "marginal"


def test_closed_form_L22_formula():
    assert closed_form_L22(LINEAR, Fraction(1)) == 4


def test_numeric_cycle_search_rediscovers_three_cycle():
    (cyc,) = find_cycles_numeric(LINEAR, 3, n_starts=60)
    pts = {tuple(np.round(p.coords, 8)) for p in cyc.points}
    assert pts == {(0.0, 1.0, 0.0), (1.0, 0.0, 1.0), (-1.0, 1.0, 1.0)}
    assert cyc.multiplier == pytest.approx(4, rel=1e-8)


def test_numeric_cycle_search_is_reproducible():
    a = find_cycles_numeric(LINEAR, 5, n_starts=40, seed=7)
    b = find_cycles_numeric(LINEAR, 5, n_starts=40, seed=7)
    assert [c.points[0].coords for c in a] == [c.points[0].coords for c in b]
    for c in a:
        f = lambdify(dynamics_frame(LINEAR).map.components)
        p = c.points[0].coords
        q = p
        for _ in range(5):
            q = f(*q)
        assert np.allclose(q, p, atol=1e-9)


def test_numeric_cycle_length_bounds():
    with pytest.raises(ValidationError):
        find_cycles_numeric(LINEAR, 9)


def test_L22_near_degenerate_root():
    # h has a root within 2e-7 of nu; float evaluation of the expanded
    # Jacobians would lose the structural zeros here
    params = FieldParams(
        UniPoly([15, -1, -14]), UniPoly([Fraction(11, 3), -6]),
        a10=Fraction(14, 3), a11=-9, a12=3, a20=Fraction(-13, 2), a21=-2, A3=-8,
    )
    for cyc in find_3cycle(params):
        M = cyc.product_matrix
        assert all(M[i][0] == 0 for i in range(3)) and M[2][2] == 0
        assert M[1][1] == pytest.approx(float(cyc.closed_form_multiplier), rel=1e-12)
