import math
from fractions import Fraction

import pytest

from errors import ConfigError, SymbolError
from scalars import ScalarPoly
from symbols import (Chart, HSymbol, Part, Truncation, circ_product, commutator, hbar_order, invert, poisson,
                     power, project, xi_antiderivative)


def s_symbol(trunc):
    return HSymbol.scalar(trunc, ScalarPoly.s_variable(trunc.ring))


def test_truncation_defaults_and_checks():
    trunc = Truncation(2, -4, 6, 1, 0)
    assert trunc.n_t == 6
    assert trunc.n_tbar == 0
    assert Truncation(1, -3, 3, 1, 1).n_tbar == 3
    with pytest.raises(ConfigError):
        Truncation(1, 1, 3)
    with pytest.raises(ConfigError):
        Truncation(-1, -3, 3)


def test_shift_times_s_respects_operator_order(trunc):
    xi = HSymbol.xi(trunc)
    s = s_symbol(trunc)
    left = circ_product(xi, s)
    assert left.coefficient(0, 1) == ScalarPoly.s_variable(trunc.ring)
    assert left.coefficient(1, 1) == 1
    assert circ_product(s, xi) == HSymbol.from_coefficient(trunc, 1, ScalarPoly.s_variable(trunc.ring))
    assert commutator(xi, s) == HSymbol.xi(trunc).shift_hbar(1)


def test_terms_outside_the_window_set_validity(trunc):
    beyond = HSymbol.xi(trunc, 5)
    assert beyond.is_zero()
    assert beyond.valid_hi == 4
    assert beyond.chart is Chart.AT_ZERO
    assert HSymbol.xi(trunc, -1).chart is Chart.EXACT


def test_chart_mismatch_is_rejected(trunc):
    one = ScalarPoly.one(trunc.ring)
    at_infinity = HSymbol(trunc, [{1: one}], None, -3, None)
    at_zero = HSymbol(trunc, [{-1: one}], None, None, 3)
    with pytest.raises(SymbolError):
        circ_product(at_infinity, at_zero)


def test_powers_of_the_shift(trunc):
    assert power(HSymbol.xi(trunc), 3) == HSymbol.xi(trunc, 3)
    assert power(HSymbol.xi(trunc), 0) == HSymbol.one(trunc)


def test_associativity_on_sample_symbols(trunc):
    ring = trunc.ring
    s = s_symbol(trunc)
    a = HSymbol.xi(trunc) + s
    b = HSymbol.from_coefficient(trunc, -1, ScalarPoly.u_power(ring, 2)) + HSymbol.hbar(trunc)
    c = HSymbol.from_coefficient(trunc, 1, ScalarPoly.ell(ring))
    assert circ_product(circ_product(a, b), c) == circ_product(a, circ_product(b, c))


def test_inverse_of_shift_is_exact(trunc):
    assert invert(HSymbol.xi(trunc)) == HSymbol.xi(trunc, -1)


def test_inverse_at_infinity(trunc):
    a = HSymbol.xi(trunc) + s_symbol(trunc)
    inverse = invert(a, Chart.AT_INFINITY)
    assert inverse.chart is Chart.AT_INFINITY
    assert (circ_product(inverse, a) - HSymbol.one(trunc)).is_zero()
    assert (circ_product(a, inverse) - HSymbol.one(trunc)).is_zero()


def test_inverse_needs_a_unit(trunc):
    with pytest.raises(SymbolError):
        invert(HSymbol.scalar(trunc, ScalarPoly.ell(trunc.ring)))


def test_poisson_bracket_of_shift_and_s(trunc):
    bracket = poisson(HSymbol.xi(trunc), s_symbol(trunc))
    assert bracket.trunc.n_hbar == 0
    assert bracket.coefficient(0, 1) == 1
    assert list(bracket.terms()) == [(0, 1, bracket.coefficient(0, 1))]


def test_projections_split_a_symbol(trunc):
    a = HSymbol.xi(trunc, -2) + s_symbol(trunc) + HSymbol.xi(trunc)
    high = project(a, Part.GEQ_ZERO)
    low = project(a, Part.LEQ_MINUS_ONE)
    assert high + low == a
    assert low == HSymbol.xi(trunc, -2)


def test_xi_antiderivative_returns_log_coefficient(trunc0):
    ring = trunc0.ring
    a = HSymbol(trunc0, [{-1: ScalarPoly.constant(ring, 3), 1: ScalarPoly.constant(ring, 2)}])
    integral, alpha = xi_antiderivative(a)
    assert alpha == 3
    assert integral == HSymbol.xi(trunc0, 2)
    varying = HSymbol.from_coefficient(trunc0, -1, ScalarPoly.u_power(ring, 1))
    with pytest.raises(SymbolError):
        xi_antiderivative(varying)


def test_hbar_order(trunc):
    assert hbar_order(HSymbol.hbar(trunc)) == -1
    assert hbar_order(HSymbol.one(trunc)) == 0
    assert hbar_order(HSymbol.zero(trunc)) == -math.inf


def test_log_slot_only_multiplies_constants(trunc):
    log = HSymbol.log_xi(trunc, Fraction(1, 2))
    assert circ_product(log, HSymbol.constant(trunc, 4)).logxi[0] == 2
    with pytest.raises(SymbolError):
        circ_product(log, s_symbol(trunc))


def test_d_xi_of_log(trunc):
    log = HSymbol.log_xi(trunc, 3)
    assert log.d_xi() == HSymbol.from_coefficient(trunc, -1, ScalarPoly.constant(trunc.ring, 3))


def test_record_restores_the_symbol(trunc):
    ring = trunc.ring
    a = (HSymbol.from_coefficient(trunc, -2, ScalarPoly.u_power(ring, Fraction(1, 2)), order=1)
         + HSymbol.log_xi(trunc, Fraction(-1, 3)) + s_symbol(trunc)).restrict(lo=-3)
    assert HSymbol.from_record(trunc, a.to_record()) == a
