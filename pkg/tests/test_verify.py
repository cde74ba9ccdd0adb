import dataclasses
from fractions import Fraction

import pytest

from errors import CheckReport
from scalars import RingSpec, ScalarPoly
from symbols import Chart, HSymbol, Truncation, circ_product
from verify import (DiffOp, check_ccr, check_cnm_tables, check_dispersionless, check_lax, check_rh,
                    check_string_equation, closed_form_xbar, cnm_closed_form, cnm_recursion, dress_lax,
                    first_failing_order, lax_coefficients, op_mul, oracle_battery, oracle_total_symbol, run_battery,
                    shift_scalar, substitute)

RING = RingSpec(n_t=1, n_tbar=0, t_deg=1, tbar_deg=0)


@pytest.fixture(scope="module")
def string_pack(c1_small):
    _, triple = c1_small
    return dress_lax(triple, n_max=2)


def test_shift_of_log():
    shifted = shift_scalar(ScalarPoly.ell(RING), 1, 2)
    assert shifted[0] == ScalarPoly.ell(RING)
    assert shifted[1] == ScalarPoly.u_power(RING, -1, -1)
    assert shifted[2] == ScalarPoly.u_power(RING, -2, Fraction(-1, 2))


def test_shift_operator_moves_s():
    s = ScalarPoly.s_variable(RING)
    shift = DiffOp.shift(RING, 1, -2, 2)
    product = op_mul(shift, DiffOp.multiplication(RING, 1, -2, 2, s))
    assert product.coeffs == {1: [s, ScalarPoly.one(RING)]}


def test_total_symbol_of_an_oracle_product():
    trunc = Truncation(1, -2, 2, 1, 0)
    ring = trunc.ring
    s = ScalarPoly.s_variable(ring)
    product = op_mul(DiffOp.shift(ring, 1, -2, 2), DiffOp.multiplication(ring, 1, -2, 2, s))
    total = oracle_total_symbol(product, trunc)
    assert total.coefficient(0, 1) == s
    assert total.coefficient(1, 1) == ScalarPoly.one(ring)
    assert total.orders == circ_product(HSymbol.xi(trunc), HSymbol.scalar(trunc, s)).orders


def test_oracle_battery_agrees():
    reports = oracle_battery(Truncation(2, -4, 4, 2, 0), pairs=20, triples=10, seed=0)
    assert [report.name for report in reports] == ["oracle: circ_product = op_mul", "oracle: associativity"]
    assert all(report.passed for report in reports), [r.residuals[:3] for r in reports]


@pytest.mark.slow
def test_string_hierarchy_checks_pass(c1_small, string_pack):
    data, _ = c1_small
    reports = run_battery(string_pack, data, lambda pack: [check_string_equation(pack)])
    for report in reports:
        assert report.passed, report.summary()
    assert check_lax(string_pack).checked > 0


def test_ccr_and_dispersionless(string_pack):
    assert check_ccr(string_pack).passed
    assert check_dispersionless(string_pack).passed


def test_flipped_xbar_fails_at_first_order(c1_small):
    data, triple = c1_small
    broken = dataclasses.replace(triple, Xbar=[triple.Xbar[0], -triple.Xbar[1], triple.Xbar[2]])
    report = check_rh(dress_lax(broken, n_max=1), data)
    assert not report.passed
    assert first_failing_order(report) == 1


def test_first_failing_order_of_a_passing_report():
    assert first_failing_order(CheckReport("empty", True, 3, [])) is None


def test_closed_form_and_cnm(c1_order2):
    _, triple = c1_order2
    assert closed_form_xbar(triple).passed
    table = check_cnm_tables(triple)
    assert table.report.passed
    rows = {(row["i"], row["m"]): row for row in table.rows}
    assert rows[(1, 2)]["extracted"] == -3
    assert rows[(2, 3)]["extracted"] == 11
    assert rows[(1, 0)]["extracted"] == Fraction(1, 2)


def test_cnm_closed_form_and_recursion():
    assert cnm_closed_form(0, 4) == 1
    assert cnm_closed_form(2, 3) == 11
    recursion = cnm_recursion(2, 4)
    for m in range(1, 5):
        assert recursion[(1, m)] == cnm_closed_form(1, m)
    assert recursion[(1, 0)] == Fraction(1, 2)


def test_lax_operator_starts_with_the_shift(string_pack):
    coefficients = lax_coefficients(string_pack)
    lead = [row for row in coefficients["coefficients"]
            if row["operator"] == "L" and row["hbar"] == 0 and row["xi"] == 1]
    assert lead[0]["coefficient"] == "1"
    assert coefficients["principal"]["L"]


@pytest.mark.slow
def test_full_size_oracle_battery():
    reports = oracle_battery(Truncation(3, -4, 4, 2, 0), pairs=200, triples=100, seed=1)
    assert [report.checked for report in reports] == [200, 100]
    assert all(report.passed for report in reports), [r.residuals[:3] for r in reports]


def test_perturbed_m_breaks_the_commutation_relation(string_pack):
    s = HSymbol.scalar(string_pack.trunc, ScalarPoly.s_variable(string_pack.trunc.ring))
    report = check_ccr(dataclasses.replace(string_pack, M=string_pack.M + s))
    assert not report.passed
    assert any(r.startswith("[L, M] = hbar L") for r in report.residuals)
    assert not any(r.startswith("[Lbar, Mbar]") for r in report.residuals)


def test_corrupted_pack_breaks_the_dispersionless_equations(string_pack):
    s = HSymbol.scalar(string_pack.trunc, ScalarPoly.s_variable(string_pack.trunc.ring))
    report = check_dispersionless(dataclasses.replace(string_pack, Mbar=string_pack.Mbar + s))
    assert not report.passed
    assert any(r.startswith("dMbar0/dt1") for r in report.residuals)
    assert not any(r.startswith("dL0/dt1") for r in report.residuals)


def test_rh_check_substitutes_the_dressed_operators(c1_small, string_pack):
    data, _ = c1_small
    data = data.on(string_pack.trunc)
    trunc = string_pack.trunc
    left = substitute(data.fbar, string_pack.Mbar, string_pack.Lbar, Chart.AT_ZERO)
    factor = HSymbol.one(trunc) - string_pack.Mbar - HSymbol.hbar(trunc)
    assert left.agrees_with(circ_product(factor, string_pack.Lbar))
    assert substitute(data.g, string_pack.M, string_pack.L, Chart.AT_INFINITY).agrees_with(string_pack.M)
    report = check_rh(string_pack, data)
    assert report.passed
    assert report.detail.endswith("substituted")


def test_substitution_needs_polynomial_coefficients(string_pack):
    trunc = string_pack.trunc
    inverse_u = HSymbol.scalar(trunc, ScalarPoly.u_power(trunc.ring, -1))
    assert substitute(inverse_u, string_pack.M, string_pack.L, Chart.AT_INFINITY) is None


@pytest.fixture(scope="module")
def two_time_pack(identity_two_times):
    _, triple = identity_two_times
    return dress_lax(triple, n_max=2)


def test_both_time_families_pass_every_check(identity_two_times, two_time_pack):
    data, _ = identity_two_times
    reports = run_battery(two_time_pack, data)
    for report in reports:
        assert report.passed, report.summary()
    assert reports[0].detail == "16 equations"
    assert two_time_pack.Mbar.valid_lo is None
    assert two_time_pack.M.agrees_with(two_time_pack.Mbar)


def test_bar_flow_generators_of_the_identity(two_time_pack):
    trunc = two_time_pack.trunc
    assert two_time_pack.Bbar[0].orders == HSymbol.xi(trunc, -1).orders
    assert two_time_pack.Bbar[1].orders == HSymbol.xi(trunc, -2).orders
