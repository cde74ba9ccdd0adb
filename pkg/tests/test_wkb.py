from fractions import Fraction

import numpy as np
import pytest

from adjoint import BAR, UNBAR
from errors import SymbolError
from rhsolver import compare_symbols
from scalars import ScalarPoly
from symbols import HSymbol, Truncation
from verify import exp_function_symbol, exp_operator_symbol, random_scalar, stack_slices
from wkb import exp_to_wkb, exp_to_wkb_bar, triple_phases, wkb_bar_to_exp, wkb_to_exp

TRUNC = Truncation(1, -3, 3, 0, 0)
SLICE = TRUNC.with_hbar(0)
RING = TRUNC.ring
ORACLE = Truncation(4, -3, 3, 0, 0)
TIMED_ORACLE = Truncation(4, -3, 3, 1, 1)
DEEP_SLICE = Truncation(2, -4, 4, 1, 0).with_hbar(0)


def u(q, coeff=1):
    return ScalarPoly.u_power(RING, q, coeff)


def piece(coeffs):
    total = HSymbol.zero(SLICE)
    for m, coeff in coeffs.items():
        total = total + HSymbol.from_coefficient(SLICE, m, coeff)
    return total


def random_pieces(rng, n_max, sign, trunc=SLICE):
    depth = -trunc.xi_lo if sign < 0 else trunc.xi_hi
    pieces = []
    for _ in range(n_max + 1):
        total = HSymbol.zero(trunc)
        for m in range(1, depth + 1):
            if rng.random() < 0.6:
                total = total + HSymbol.from_coefficient(trunc, sign * m, random_scalar(trunc.ring, rng, terms=2))
        pieces.append(total)
    return pieces


def test_second_degree_phase_of_a_single_shift():
    S = exp_to_wkb([piece({-1: u(2)}), HSymbol.zero(SLICE)])
    assert S[0].coefficient(0, -1) == u(2)
    assert S[0].coefficient(0, -2) == u(3)
    assert S[1].coefficient(0, -1) == 0
    assert S[1].coefficient(0, -2) == u(2, Fraction(1, 2))


def test_bar_phase_carries_phi():
    phi = [-u(1) * ScalarPoly.ell(RING) + u(1), ScalarPoly.ell(RING, Fraction(1, 2))]
    phase = exp_to_wkb_bar([piece({1: u(2)}), HSymbol.zero(SLICE)], phi)
    assert phase.side == BAR
    assert phase.phi() == phi
    assert phase.S[0].coefficient(0, 2) == u(3, -1)
    assert phase.S[1].coefficient(0, 2) == u(2, Fraction(1, 2))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_phase_matches_operator_exponential(seed):
    rng = np.random.default_rng(seed)
    xs = random_pieces(rng, ORACLE.n_hbar, -1, ORACLE.with_hbar(0))
    S = exp_to_wkb(xs)
    depth = -ORACLE.xi_lo
    report = compare_symbols("wkb oracle", exp_operator_symbol(stack_slices(xs, ORACLE), depth),
                             exp_function_symbol(stack_slices(S, ORACLE), depth))
    assert report.passed, report.residuals


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_time_dependent_phase_matches_operator_exponential(seed):
    rng = np.random.default_rng(100 + seed)
    xs = random_pieces(rng, TIMED_ORACLE.n_hbar, -1, TIMED_ORACLE.with_hbar(0))
    S = exp_to_wkb(xs)
    depth = -TIMED_ORACLE.xi_lo
    report = compare_symbols("wkb oracle", exp_operator_symbol(stack_slices(xs, TIMED_ORACLE), depth),
                             exp_function_symbol(stack_slices(S, TIMED_ORACLE), depth))
    assert report.passed, report.residuals


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_bar_phase_matches_operator_exponential(seed):
    rng = np.random.default_rng(200 + seed)
    xbars = random_pieces(rng, TIMED_ORACLE.n_hbar, 1, TIMED_ORACLE.with_hbar(0))
    zero = [ScalarPoly.zero(TIMED_ORACLE.ring)] * len(xbars)
    phase = exp_to_wkb_bar(xbars, zero)
    depth = TIMED_ORACLE.xi_hi
    report = compare_symbols("bar wkb oracle", exp_operator_symbol(stack_slices(xbars, TIMED_ORACLE), depth),
                             exp_function_symbol(stack_slices(phase.S, TIMED_ORACLE), depth))
    assert report.passed, report.residuals


@pytest.mark.parametrize("seed", [3, 4])
def test_exp_and_wkb_are_inverse(seed):
    rng = np.random.default_rng(seed)
    xs = random_pieces(rng, 2, -1)
    back = wkb_to_exp(exp_to_wkb(xs, UNBAR), UNBAR)
    for original, restored in zip(xs, back):
        assert (original - restored).is_zero()


@pytest.mark.slow
def test_exp_and_wkb_are_inverse_on_deep_timed_support():
    rng = np.random.default_rng(7)
    for _ in range(50):
        xs = random_pieces(rng, 2, -1, DEEP_SLICE)
        back = wkb_to_exp(exp_to_wkb(xs, UNBAR), UNBAR)
        for original, restored in zip(xs, back):
            assert (original - restored).is_zero()
    for _ in range(5):
        xbars = random_pieces(rng, 2, 1, DEEP_SLICE)
        phi = [random_scalar(DEEP_SLICE.ring, rng, terms=2) for _ in xbars]
        restored_x, restored_phi = wkb_bar_to_exp(exp_to_wkb_bar(xbars, phi))
        assert restored_phi == phi
        assert all((a - b).is_zero() for a, b in zip(xbars, restored_x))


@pytest.mark.parametrize("side", [UNBAR, BAR])
def test_phase_order_depends_only_on_lower_exponent_orders(side):
    sign = -1 if side == UNBAR else 1
    rng = np.random.default_rng(11)
    xs = random_pieces(rng, 2, sign, DEEP_SLICE)
    bump = HSymbol.from_coefficient(DEEP_SLICE, sign, ScalarPoly.u_power(DEEP_SLICE.ring, 1))
    S = exp_to_wkb(xs, side)
    for n in (1, 2):
        perturbed = list(xs)
        perturbed[n] = perturbed[n] + bump
        moved = exp_to_wkb(perturbed, side)
        for k in range(n):
            assert (moved[k] - S[k]).is_zero()
        assert moved[n].coefficient(0, sign) == S[n].coefficient(0, sign) + ScalarPoly.u_power(DEEP_SLICE.ring, 1)


def test_bar_round_trip_restores_log_slots():
    rng = np.random.default_rng(5)
    xbars = random_pieces(rng, 1, 1)
    xbars[1] = HSymbol(SLICE, list(xbars[1].orders), [Fraction(-1, 2)])
    phi = [ScalarPoly.ell(RING, -1), u(-1, Fraction(1, 3))]
    phase = exp_to_wkb_bar(xbars, phi)
    assert phase.alphabar == [0, Fraction(-1, 2)]
    restored, phi_back = wkb_bar_to_exp(phase)
    assert phi_back == phi
    for original, result in zip(xbars, restored):
        assert (original - result).is_zero()
        assert original.logxi == result.logxi


def test_support_on_the_wrong_side_is_rejected():
    with pytest.raises(SymbolError):
        exp_to_wkb([piece({1: u(1)})])
    with pytest.raises(SymbolError):
        exp_to_wkb([piece({0: u(1)})], BAR)


def test_solved_string_phases(c1_order1):
    _, triple = c1_order1
    unbar, bar = triple_phases(triple)
    assert unbar.order == 1
    assert all(phase.is_zero() for phase in unbar.S)
    assert bar.phi() == triple.phi
    ring = triple.trunc.ring
    assert bar.S[0].coefficient(0, 1) == ScalarPoly.t_variable(ring, 1) * ScalarPoly.u_power(ring, 1)
