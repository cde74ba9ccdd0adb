from fractions import Fraction

import pytest

from errors import CheckFailure
from scalars import RingSpec, ScalarPoly
from tau import (TauExpansion, TauGradient, assemble, check_difference_relation, extract_v, grad_s,
                 integrate_F, tau_gradient)
from wkb import triple_phases

RING = RingSpec(n_t=1, n_tbar=0, t_deg=2, tbar_deg=0)


def string_phi(ring):
    u = ScalarPoly.u_power(ring, 1)
    ell = ScalarPoly.ell(ring)
    return [-u * ell + u, ell.scale(Fraction(1, 2)), ScalarPoly.u_power(ring, -1, Fraction(-1, 12))]


def test_s_gradient_of_the_string_solution():
    phi = string_phi(RING)
    assert grad_s(phi, 0) == phi[0]
    assert grad_s(phi, 1) == phi[1] - phi[0].scale(Fraction(1, 2))
    expected = (ScalarPoly.u_power(RING, -1, Fraction(-1, 12)) - ScalarPoly.ell(RING, Fraction(1, 4))
                + phi[0].scale(Fraction(1, 12)))
    assert grad_s(phi, 2) == expected


def test_integration_follows_the_gradient():
    t1 = ScalarPoly.t_variable(RING, 1)
    s = ScalarPoly.s_variable(RING)
    grad = TauGradient.zero(RING, 0, j_max=1)
    grad.dF_ds[0] = t1
    grad.dF_dt[(0, 1)] = s + t1
    expansion = integrate_F(grad)
    assert expansion.F[0] == t1 * s + (t1 * t1).scale(Fraction(1, 2))
    assert all(report.passed for report in expansion.reports)


def test_cross_derivative_mismatch_names_the_pair():
    grad = TauGradient.zero(RING, 0, j_max=1)
    grad.dF_ds[0] = ScalarPoly.t_variable(RING, 1)
    grad.dF_dt[(0, 1)] = ScalarPoly.u_power(RING, 1)
    with pytest.raises(CheckFailure, match=r"\(t1, s\)"):
        integrate_F(grad)


def test_difference_relation_on_the_seed():
    phi = string_phi(RING)
    expansion = TauExpansion({0: phi[0].antideriv_s()})
    assert check_difference_relation(expansion, phi).passed
    assert not check_difference_relation(expansion, [phi[1]]).passed


def test_string_tau_expansion(c1_order2):
    _, triple = c1_order2
    unbar, bar = triple_phases(triple)
    tables, grad, expansion = assemble(unbar, bar, triple.trunc)
    ring = triple.trunc.ring
    assert tables.n_max == 2
    assert tables.phi == triple.phi
    assert sorted(expansion.F) == [0, 1, 2]
    assert all(report.passed for report in expansion.reports if report.name != "tau: genus parity")
    assert expansion.reports[-1].detail.startswith("genus-form: ")
    free, _ = expansion.F[0].split_by_nilpotency()
    u2 = ScalarPoly.u_power(ring, 2)
    assert free == u2 * ScalarPoly.ell(ring, Fraction(1, 2)) - u2.scale(Fraction(3, 4))
    record = expansion.to_record()
    assert set(record["F"]) == {"0", "1", "2"}


def test_gradient_exactness_lowers_differentiated_components(c1_order1):
    _, triple = c1_order1
    tables = extract_v(*triple_phases(triple))
    grad = tau_gradient(tables)
    t_cap = triple.trunc.ring.t_deg
    assert grad.exact[("s", 1)] == (t_cap, 0)
    if grad.j_max >= 2:
        assert grad.exact[("t", 1, 2)] == (t_cap - 1, 0)


def test_tau_of_the_identity_with_both_time_families(identity_two_times):
    _, triple = identity_two_times
    unbar, bar = triple_phases(triple)
    _, grad, expansion = assemble(unbar, bar, triple.trunc)
    ring = triple.trunc.ring
    assert grad.jbar_max >= 1
    assert grad.dF_dtbar[(0, 1)] == -ScalarPoly.t_variable(ring, 1)
    expected = ScalarPoly.zero(ring)
    for n in range(1, 4):
        expected = expected - (ScalarPoly.t_variable(ring, n) * ScalarPoly.t_variable(ring, n, bar=True)).scale(n)
    assert expansion.F[0] == expected
    assert not expansion.F.get(1)
    assert not expansion.F.get(2)
    assert all(report.passed for report in expansion.reports if report.name != "tau: genus parity")
