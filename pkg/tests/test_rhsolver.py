import dataclasses
from fractions import Fraction

import pytest

from adjoint import UNBAR
from errors import ConfigError, SeedError, WindowExhausted
from expr_parser import compile_expr
from presets import get_preset
from rhsolver import _trim, build_PQ, check_compatibility, default_window_pad, run, verify_seed
from scalars import ScalarPoly
from symbols import HSymbol, Truncation
from verify import elementary_symmetric


def expected_xbar(ring, n, order):
    """Coefficient of ℏ^order ξ^n in Σ t_n Π_{k=1}^{n} (u - kℏ) ξ^n."""
    weight = elementary_symmetric(order, range(1, n + 1)) * (-1) ** order
    if not weight:
        return ScalarPoly.zero(ring)
    return ScalarPoly.t_variable(ring, n) * ScalarPoly.u_power(ring, n - order, weight)


def test_string_seed_passes_its_self_test(trunc):
    data = get_preset("c1-string").load(trunc)
    assert all(report.passed for report in verify_seed(data, trunc))


def test_order_one_string_solution(c1_order1):
    _, triple = c1_order1
    ring = triple.trunc.ring
    assert triple.phi[1] == ScalarPoly.ell(ring, Fraction(1, 2))
    for n in range(1, 7):
        assert triple.Xbar[1].coefficient(0, n) == ScalarPoly.t_variable(ring, n) * ScalarPoly.u_power(
            ring, n - 1, Fraction(-n * (n + 1), 2))
    assert triple.X[1].is_zero()


def test_order_two_string_solution(c1_order2):
    _, triple = c1_order2
    ring = triple.trunc.ring
    u = ScalarPoly.u_power(ring, 1)
    assert triple.phi[0] == -u * ScalarPoly.ell(ring) + u
    assert triple.phi[2] == ScalarPoly.u_power(ring, -1, Fraction(-1, 12))
    for order in range(3):
        for n in range(1, 7):
            assert triple.Xbar[order].coefficient(0, n) == expected_xbar(ring, n, order)
        assert triple.X[order].is_zero()


def test_second_order_coefficient_closed_form():
    # e_2(1..n) = n(n^2 - 1)(3n + 2)/24
    for n in range(1, 9):
        assert elementary_symmetric(2, range(1, n + 1)) == Fraction(n * (n * n - 1) * (3 * n + 2), 24)


def test_unshifted_string_solution(unshifted_order2):
    _, triple = unshifted_order2
    ring = triple.trunc.ring
    assert triple.phi[1] == ScalarPoly.ell(ring, Fraction(-1, 2))
    assert triple.phi[2] == ScalarPoly.u_power(ring, -1, Fraction(-1, 12))
    for n in range(1, 5):
        weight = -elementary_symmetric(1, range(n))
        assert triple.Xbar[1].coefficient(0, n) == ScalarPoly.t_variable(ring, n) * ScalarPoly.u_power(
            ring, n - 1, weight)


def test_identity_data_keeps_the_seed(identity_order2):
    _, triple = identity_order2
    ring = triple.trunc.ring
    for order in (1, 2):
        assert triple.Xbar[order].is_zero()
        assert triple.X[order].is_zero()
        assert not triple.phi[order]
    assert triple.Xbar[0].coefficient(0, 2) == ScalarPoly.t_variable(ring, 2)


def test_compatibility_catches_a_corrupted_bar_side(identity_order2):
    data, triple = identity_order2
    state = build_PQ(data, triple, 1, triple.trunc)
    assert check_compatibility(state).passed
    ring = triple.trunc.ring
    fault = HSymbol.from_coefficient(state.Pbar.trunc, 2, ScalarPoly.one(ring), order=1)
    report = check_compatibility(dataclasses.replace(state, Pbar=state.Pbar + fault))
    assert not report.passed
    assert report.residuals


def test_wrong_seed_is_rejected(trunc):
    data = get_preset("c1-string").load(trunc)
    ring = trunc.ring
    u = ScalarPoly.u_power(ring, 1)
    wrong = dataclasses.replace(data, seed_phi0=(-u * ScalarPoly.ell(ring) + u).scale(2))
    with pytest.raises(SeedError) as excinfo:
        run(wrong, trunc)
    assert not excinfo.value.report.passed


def test_non_canonical_data_is_rejected(trunc):
    data = get_preset("c1-string").load(trunc)
    doubled = dataclasses.replace(data, g=compile_expr("2*s", trunc))
    with pytest.raises(ConfigError):
        doubled.check_canonical()


def test_default_window_pad():
    trunc = Truncation(2, -6, 6, 1, 0)
    data = get_preset("c1-string").load(trunc)
    assert default_window_pad(data, trunc) == (38, 10)


def test_trim_reports_an_exhausted_window():
    trunc = Truncation(1, -4, 4, 1, 0)
    piece = HSymbol(trunc.with_hbar(0), [{-1: ScalarPoly.one(trunc.ring)}], None, -2, None)
    with pytest.raises(WindowExhausted) as excinfo:
        _trim(piece, trunc, UNBAR, 1)
    assert "window-pad" in excinfo.value.hint
