import math
from fractions import Fraction

import numpy as np
import pytest

from nilflow import poincare
from nilflow.continuous import conjugated_field, integrate
from nilflow.errors import IntegrationError, ValidationError
from nilflow.field import FieldParams, pushforward_field
from nilflow.poincare import (
    UNIT_HAMILTONIAN,
    UNIT_PLANAR,
    UNIT_SYSTEM,
    SectionPoint,
    classify_trajectory,
    displacement_profile,
    find_cstar,
    normal_planar,
    normal_system,
    planar_critical_points,
    reduce,
    return_map,
    return_orbit,
    unit_energy,
    verify_isochronous_surface,
)
from nilflow.continuous import lie_derivative
from nilflow.poly import UniPoly
from oracles import grid_extrema_2d


def mu_params(A3):
    return FieldParams(UniPoly([0, 1]), UniPoly([0, 1]), a12=1, A3=A3)


def test_reduction_mu_and_classes():
    assert reduce(mu_params(-6)).mu == -6
    assert reduce(mu_params(-6)).classification == "isochronous_surface"
    assert reduce(mu_params(0)).classification == "cuspidal_surface"
    assert reduce(mu_params(1)).classification == "all_escape"
    # mu = A3 a12 p21 p11^2
    p = FieldParams(UniPoly([1, 2]), UniPoly([0, 3]), a12=Fraction(1, 2), A3=-1)
    assert reduce(p).mu == Fraction(-1) * Fraction(1, 2) * 3 * 4


def test_reduction_is_exact_pushforward():
    p = FieldParams(UniPoly([1, 2]), UniPoly([-1, 3]), a10=2, a12=-1, a20=1, a21=4, A3=2)
    red = reduce(p)
    from nilflow.field import build_field

    chart = red.normal_to_original.with_inverse(red.original_to_normal)
    assert pushforward_field(build_field(p), chart) == normal_system(red.mu)


def test_reduction_requires_linear_p():
    with pytest.raises(ValidationError):
        reduce(FieldParams(UniPoly([0, 0, 1]), UniPoly([0, 1]), a12=1))
    with pytest.raises(ValidationError, match="a12 = 0"):
        reduce(FieldParams(UniPoly([0, 1]), UniPoly([0, 1])))


def test_unit_rescaling_maps_normal_system_to_unit_system():
    red = reduce(mu_params(-6))
    b = red.beta
    p = (0.3, -0.7, 1.1)
    q = red.normal_to_unit(p)
    assert np.allclose(red.unit_to_normal(q), p)
    # d/dtau of unit coordinates equals the unit field at q
    Np = np.array(normal_system(-6)(tuple(map(Fraction, p))), dtype=float)
    dq = np.array([Np[0] / math.sqrt(b), Np[1] / b, Np[2] / b**1.5]) / math.sqrt(b)
    assert np.allclose(dq, [float(c(*q)) for c in UNIT_SYSTEM.components])


def test_unit_hamiltonian_conserved():
    assert lie_derivative(UNIT_SYSTEM, UNIT_HAMILTONIAN).is_zero()
    assert unit_energy(2.0, 0.0) == pytest.approx(4 / 3)


def test_unit_critical_points():
    pts = sorted(planar_critical_points(UNIT_PLANAR), key=lambda c: c.point)
    assert [(c.point, c.kind) for c in pts] == [((0.0, 0.0), "center"), ((2.0, 0.0), "saddle")]
    assert [c.energy for c in pts] == [0.0, pytest.approx(4 / 3)]


def test_normal_planar_mu_signs():
    assert planar_critical_points(normal_planar(1)) == []
    kinds = sorted(c.kind for c in planar_critical_points(normal_planar(-6)))
    assert kinds == ["center", "saddle"]
    (deg,) = planar_critical_points(normal_planar(0))
    assert deg.kind == "degenerate"


def test_two_annuli_against_grid_oracle():
    params = FieldParams(UniPoly([-3, -1, 1]), UniPoly([0, 1]), a12=1, A3=-6)
    crit = planar_critical_points(params)
    centers = sorted(c.point for c in crit if c.kind == "center")
    # H(v, w) = w^2/2 - int (s^2 - s - 3)^2 ds + 6 v, evaluated independently with numpy
    sq = np.polynomial.Polynomial([-3, -1, 1]) ** 2
    F = sq.integ()
    ex = grid_extrema_2d(lambda v, w: w**2 / 2 - F(v) + 6 * v, ((-3.0, 4.0), (-2.0, 2.0)), 1e-2)
    assert len(ex["center"]) == len(centers) == 2
    for (v, w), (gv, gw) in zip(centers, sorted(ex["center"])):
        assert abs(v - gv) < 2e-2 and abs(w - gw) < 2e-2


def test_section_point_validation():
    with pytest.raises(ValidationError):
        SectionPoint(0.0, 4 / 3)
    with pytest.raises(ValidationError):
        SectionPoint(0.0, 0.0)


def test_return_map_signs_and_energy():
    lo, hi = return_map(2 / 3), return_map(1.33)
    assert lo.displacement < 0 < hi.displacement
    assert lo.c_drift < 1e-8 and hi.c_drift < 1e-8
    assert lo.return_point.x == pytest.approx(lo.displacement)


def test_return_time_independent_of_x():
    times = [return_map(1.0, x).return_time for x in (-4.0, 0.0, 2.7)]
    assert max(times) - min(times) < 1e-9


def test_return_orbit_rows():
    rec, rows = return_orbit(1.0)
    assert rows[0][0] == 0.0 and rows[-1][0] == pytest.approx(rec.return_time)
    assert all(a[0] < b[0] for a, b in zip(rows, rows[1:]))


def test_return_map_time_cap():
    with pytest.raises(IntegrationError):
        return_map(1.0, time_cap=1.0)


def test_displacement_profile_monotone():
    prof = displacement_profile(list(np.linspace(0.7, 1.33, 12)))
    assert prof.sign_changes == 1
    assert prof.monotonicity_violations == 0


def test_isochrony_and_original_period():
    cs = find_cstar(1e-11)
    rep = verify_isochronous_surface(cs.c_star, params=mu_params(-6))
    assert rep.isochronous
    red = reduce(mu_params(-6))
    assert rep.original_period == pytest.approx(rep.period / math.sqrt(red.beta))
    # the original-coordinate start returns after the original period
    from nilflow.field import build_field

    tr = integrate(build_field(mu_params(-6)), rep.original_start, (0.0, rep.original_period), 1e-12)
    assert np.allclose(tr.states[-1], rep.original_start, atol=1e-5)


def test_classify_trajectories():
    assert classify_trajectory(mu_params(1), (0, 0, 0), evidence=False).outcome == "escapes_both_directions"
    assert classify_trajectory(mu_params(0), (0, 0, 0), evidence=False).outcome == "equilibrium"
    cs = find_cstar(1e-11)
    on = classify_trajectory(mu_params(-6), (1.0, 0.0, cs.z_star), frame="unit", evidence=False)
    assert on.outcome == "on_periodic_surface"
    off = classify_trajectory(mu_params(-6), (0.0, 0.0, 1.6323), frame="unit", evidence=False)
    assert off.outcome == "escapes_off_surface"
    lin = FieldParams(UniPoly([0, 1]), UniPoly([0, 1]))
    assert classify_trajectory(lin, (1, 0, 0), evidence=False).outcome == "equilibrium"
    assert classify_trajectory(lin.replace(A3=Fraction(1)), (1, 0, 0), evidence=False).outcome == "escapes_both_directions"
